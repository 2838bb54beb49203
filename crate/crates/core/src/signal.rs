//! Behavioral receive channel.
//!
//! Each channel sees the incident plane wave with its geometric phase, then
//! applies the phase-shifter word (8 bits), the sampler phase-interpolator
//! delay (6 bits, 76 ps per step) and the TIA gain word (3 bits, 7 to 10 dB).
//! With `f_lo == f_rf` (homodyne) the baseband output is a complex DC level.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{ArrayGeometry, PlaneWaveSource};
use crate::{Error, Result};

pub const PHASE_CODE_MAX: u8 = 255;
pub const DELAY_CODE_MAX: u8 = 63;
pub const GAIN_CODE_MAX: u8 = 7;

/// Delay added per phase-interpolator step.
pub const DELAY_STEP_S: f64 = 76e-12;
pub const GAIN_MIN_DB: f64 = 7.0;
pub const GAIN_MAX_DB: f64 = 10.0;

/// How an 8-bit phase word maps onto a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseMapping {
    /// 256 uniform states, 1.40625 degrees per LSB.
    #[default]
    Uniform256,
    /// 64 effective states (16 per quadrant), 5.625 degrees per LSB; the
    /// phase wraps every 64 codes.
    Quadrant64,
}

impl PhaseMapping {
    pub fn lsb_rad(self) -> f64 {
        match self {
            PhaseMapping::Uniform256 => 2.0 * PI / 256.0,
            PhaseMapping::Quadrant64 => 2.0 * PI / 64.0,
        }
    }

    pub fn states(self) -> u32 {
        match self {
            PhaseMapping::Uniform256 => 256,
            PhaseMapping::Quadrant64 => 64,
        }
    }

    /// Phase in `[0, 2 pi)`.
    pub fn phase(self, code: u8) -> f64 {
        (u32::from(code) % self.states()) as f64 * self.lsb_rad()
    }

    /// Nearest code producing `phase` (any real value; wrapped first).
    pub fn code_for_phase(self, phase: f64) -> u8 {
        let turns = phase / (2.0 * PI);
        let frac = turns - libm::floor(turns);
        let states = self.states();
        let code = libm::round(frac * f64::from(states)) as u32 % states;
        code as u8
    }
}

/// Phase of an 8-bit word under the default uniform mapping.
pub fn phase_from_code(phase_code: u8) -> f64 {
    PhaseMapping::Uniform256.phase(phase_code)
}

pub fn delay_from_code(delay_code: u8) -> Result<f64> {
    check_code("delay", delay_code, DELAY_CODE_MAX)?;
    Ok(f64::from(delay_code) * DELAY_STEP_S)
}

/// Gain in dB, linear in dB across the eight codes.
pub fn gain_from_code(gain_code: u8) -> Result<f64> {
    check_code("gain", gain_code, GAIN_CODE_MAX)?;
    Ok(GAIN_MIN_DB + f64::from(gain_code) * (GAIN_MAX_DB - GAIN_MIN_DB) / f64::from(GAIN_CODE_MAX))
}

/// Voltage gain of a gain word.
pub fn linear_gain(gain_code: u8) -> Result<f64> {
    Ok(libm::pow(10.0, gain_from_code(gain_code)? / 20.0))
}

fn check_code(what: &'static str, code: u8, max: u8) -> Result<()> {
    if code > max {
        Err(Error::CodeOutOfRange {
            what,
            code: u32::from(code),
            max: u32::from(max),
        })
    } else {
        Ok(())
    }
}

/// Control words of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelSettings {
    pub phase_code: u8,
    delay_code: u8,
    gain_code: u8,
}

impl ChannelSettings {
    pub fn new(phase_code: u8, delay_code: u8, gain_code: u8) -> Result<Self> {
        check_code("delay", delay_code, DELAY_CODE_MAX)?;
        check_code("gain", gain_code, GAIN_CODE_MAX)?;
        Ok(Self {
            phase_code,
            delay_code,
            gain_code,
        })
    }

    pub fn with_phase(self, phase_code: u8) -> Self {
        Self { phase_code, ..self }
    }

    pub fn delay_code(&self) -> u8 {
        self.delay_code
    }

    pub fn gain_code(&self) -> u8 {
        self.gain_code
    }

    pub fn delay_s(&self) -> f64 {
        f64::from(self.delay_code) * DELAY_STEP_S
    }

    pub fn gain_linear(&self) -> f64 {
        // codes are validated on construction
        linear_gain(self.gain_code).unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Per-element SNR at baseband.
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            snr_db: 30.0,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.enabled && !self.snr_db.is_finite() {
            return Err(Error::Config(alloc::format!(
                "snr_db must be finite when noise is enabled, got {}",
                self.snr_db
            )));
        }
        Ok(())
    }
}

/// Complex additive white Gaussian noise, one ChaCha8 stream per element.
///
/// Element `e` draws from stream `e` of the generator seeded with
/// `NoiseConfig::seed`, so per-element draws do not depend on how many
/// samples other elements consumed.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rngs: Vec<ChaCha8Rng>,
    inv_snr: f64,
}

impl NoiseStream {
    pub fn new(cfg: &NoiseConfig, n_elements: usize) -> Result<Self> {
        cfg.validate()?;
        let rngs = (0..n_elements)
            .map(|e| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(e as u64);
                rng
            })
            .collect();
        Ok(Self {
            rngs,
            inv_snr: libm::pow(10.0, -cfg.snr_db / 10.0),
        })
    }

    /// One complex noise sample whose power is `signal_amplitude^2 / SNR`.
    pub fn draw(&mut self, element: usize, signal_amplitude: f64) -> Complex64 {
        let sigma = signal_amplitude * libm::sqrt(self.inv_snr / 2.0);
        let rng = &mut self.rngs[element];
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * sigma, im * sigma)
    }
}

/// Receiver-wide parameters shared by all channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Receiver {
    pub f_lo: f64,
    pub phase_mapping: PhaseMapping,
}

impl Receiver {
    /// Homodyne receiver tuned to `f_rf`.
    pub fn homodyne(f_rf: f64) -> Self {
        Self {
            f_lo: f_rf,
            phase_mapping: PhaseMapping::default(),
        }
    }

    /// Baseband output of one channel at time `t`.
    ///
    /// `A_n g exp(j 2 pi (f_rf - f_lo) t') exp(j phi_ant) exp(j phi_code)` with
    /// `t' = t + delay` and `phi_ant = k * delta_d_n`, plus noise when a
    /// stream is supplied.
    pub fn channel_sample(
        &self,
        geom: &ArrayGeometry,
        src: &PlaneWaveSource,
        element: usize,
        settings: &ChannelSettings,
        t: f64,
        noise: Option<&mut NoiseStream>,
    ) -> Result<Complex64> {
        if element >= geom.n_elements() {
            return Err(Error::IndexOutOfRange {
                index: element,
                len: geom.n_elements(),
            });
        }
        let amplitude = src.amplitude_of(element) * settings.gain_linear();
        let t_sample = t + settings.delay_s();
        let baseband = 2.0 * PI * (src.freq_rf() - self.f_lo) * t_sample;
        let antenna = src.wavenumber() * geom.path_delta(element, src.aoa_theta());
        let shifter = self.phase_mapping.phase(settings.phase_code);
        let clean = Complex64::from_polar(amplitude, baseband + antenna + shifter);
        Ok(match noise {
            Some(stream) => clean + stream.draw(element, amplitude),
            None => clean,
        })
    }

    /// Sum of all channel outputs at time `t`.
    pub fn combined(
        &self,
        geom: &ArrayGeometry,
        src: &PlaneWaveSource,
        settings: &[ChannelSettings],
        t: f64,
        mut noise: Option<&mut NoiseStream>,
    ) -> Result<Complex64> {
        if settings.len() != geom.n_elements() {
            return Err(Error::LengthMismatch {
                expected: geom.n_elements(),
                actual: settings.len(),
            });
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for (e, s) in settings.iter().enumerate() {
            sum += self.channel_sample(geom, src, e, s, t, noise.as_deref_mut())?;
        }
        Ok(sum)
    }

    /// Noise-free `|BF_out|` for a set of phase words, all other words at
    /// `base`.
    pub fn coherent_magnitude(
        &self,
        geom: &ArrayGeometry,
        src: &PlaneWaveSource,
        base: &ChannelSettings,
        phase_codes: &[u8],
    ) -> Result<f64> {
        let settings: Vec<ChannelSettings> =
            phase_codes.iter().map(|&c| base.with_phase(c)).collect();
        Ok(self.combined(geom, src, &settings, 0.0, None)?.norm())
    }

    /// Phase words that cancel the geometric phases of `geom` for `src`,
    /// relative to the reference element.
    pub fn steering_codes(&self, geom: &ArrayGeometry, src: &PlaneWaveSource) -> Vec<u8> {
        geom.geometric_phases(src.aoa_theta(), src.freq_rf())
            .iter()
            .map(|p| self.phase_mapping.code_for_phase(-p))
            .collect()
    }
}
