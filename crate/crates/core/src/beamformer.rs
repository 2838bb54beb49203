//! Channel combining and digitization of the beamformer output.
//!
//! The loop never sees the analog output: `BF_out` is normalized and
//! rounded into a 16-bit two's-complement word with 10 fractional bits
//! (sign, 5 integer bits, 10 fraction bits).

use num_complex::Complex64;

use crate::{Error, Result};

/// 16-bit fixed-point word, LSB = 2^-10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct QWord(i16);

impl QWord {
    pub const FRAC_BITS: u32 = 10;
    pub const LSB: f64 = 1.0 / 1024.0;
    pub const MIN: QWord = QWord(i16::MIN);
    pub const MAX: QWord = QWord(i16::MAX);

    pub const fn from_raw(raw: i16) -> Self {
        QWord(raw)
    }

    pub const fn raw(self) -> i16 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) * Self::LSB
    }

    /// Round to nearest (ties away from zero), saturating outside the range.
    pub fn quantize(x: f64) -> Result<Self> {
        if x.is_nan() {
            return Err(Error::NotANumber);
        }
        let scaled = libm::round(x * 1024.0);
        let raw = if scaled >= f64::from(i16::MAX) {
            i16::MAX
        } else if scaled <= f64::from(i16::MIN) {
            i16::MIN
        } else {
            scaled as i16
        };
        Ok(QWord(raw))
    }

    pub fn is_saturated(self) -> bool {
        self == Self::MIN || self == Self::MAX
    }
}

pub fn quantize(x: f64) -> Result<QWord> {
    QWord::quantize(x)
}

/// Baseband beamformer output at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfSample {
    pub i_component: f64,
    pub q_component: f64,
    pub t: f64,
}

impl BfSample {
    pub fn new(value: Complex64, t: f64) -> Self {
        Self {
            i_component: value.re,
            q_component: value.im,
            t,
        }
    }

    pub fn magnitude(&self) -> f64 {
        libm::hypot(self.i_component, self.q_component)
    }
}

/// Coherent sum of the channel outputs.
pub fn bf_out(samples: &[Complex64]) -> Result<Complex64> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    Ok(samples.iter().sum())
}

/// What the loop maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectiveKind {
    #[default]
    Magnitude,
    Power,
    InPhase,
}

impl ObjectiveKind {
    pub fn eval(self, s: &BfSample) -> f64 {
        match self {
            ObjectiveKind::Magnitude => s.magnitude(),
            ObjectiveKind::Power => s.i_component * s.i_component + s.q_component * s.q_component,
            ObjectiveKind::InPhase => s.i_component,
        }
    }
}

/// Mean of the objective over a dwell window; 0 for an empty window.
pub fn objective(window: &[BfSample], kind: ObjectiveKind) -> f64 {
    if window.is_empty() {
        return 0.0;
    }
    window.iter().map(|s| kind.eval(s)).sum::<f64>() / window.len() as f64
}

/// Maps the analog objective onto the `QWord` input range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Digitizer {
    pub scale: f64,
}

impl Digitizer {
    /// Where the noise-free coherent maximum lands, leaving headroom below +32.
    pub const TARGET_PEAK: f64 = 28.0;

    /// Scale chosen so that an objective of `coherent_max` maps to
    /// [`Self::TARGET_PEAK`].
    pub fn for_peak(coherent_max: f64) -> Result<Self> {
        if !(coherent_max > 0.0) || !coherent_max.is_finite() {
            return Err(Error::Config(alloc::format!(
                "coherent maximum must be positive, got {coherent_max}"
            )));
        }
        Ok(Self {
            scale: Self::TARGET_PEAK / coherent_max,
        })
    }

    pub fn digitize(&self, x: f64) -> Result<QWord> {
        QWord::quantize(x * self.scale)
    }
}
