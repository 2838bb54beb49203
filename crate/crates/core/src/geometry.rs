//! Conformal array geometry.
//!
//! A flexible sheet with element pitch `d` is bent over a cylinder of radius
//! `R`. The sheet is inextensible, so element `n` along the bent axis sits at
//! angular position `phi_n = n * d / R` on the arc, with the reference element
//! at `phi_0 = 0`. Angles of arrival are measured from the broadside of the
//! reference element.
//!
//! A planar `rows x columns` tile is bent along its column axis only; the
//! elements of one column share the same arc position, so in the azimuth
//! (bending) plane every row sees the same path deltas.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Chord between two points separated by `phi` on a circle of radius `radius_r`.
pub fn chord_length(radius_r: f64, phi: f64) -> Result<f64> {
    if !(radius_r > 0.0) || !radius_r.is_finite() {
        return Err(Error::InvalidRadius(radius_r));
    }
    if !(0.0..PI).contains(&phi) {
        return Err(Error::AngleOutOfRange(phi));
    }
    Ok(2.0 * radius_r * libm::sin(phi / 2.0))
}

/// Extra path length to an element at arc angle `phi_n` relative to the
/// reference element, for a plane wave arriving from `theta`.
///
/// Equal to `R cos(theta - phi_n) - R cos(theta)`. It is evaluated in the
/// product form `2 R sin(phi_n / 2) sin(theta - phi_n / 2)`, which does not
/// cancel catastrophically when `R` is huge and `phi_n` tiny.
pub fn path_delta(radius_r: f64, theta: f64, phi_n: f64) -> f64 {
    debug_assert!(radius_r > 0.0);
    2.0 * radius_r * libm::sin(phi_n / 2.0) * libm::sin(theta - phi_n / 2.0)
}

/// Free-space wavenumber `2 pi f / c`.
pub fn wavenumber(freq_hz: f64) -> f64 {
    2.0 * PI * freq_hz / SPEED_OF_LIGHT
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curvature {
    Flat,
    Radius(f64),
}

impl Curvature {
    /// Infinite radius maps to [`Curvature::Flat`].
    pub fn from_radius(radius_r: f64) -> Result<Self> {
        if radius_r == f64::INFINITY {
            Ok(Curvature::Flat)
        } else if radius_r > 0.0 && radius_r.is_finite() {
            Ok(Curvature::Radius(radius_r))
        } else {
            Err(Error::InvalidRadius(radius_r))
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            Curvature::Flat => f64::INFINITY,
            Curvature::Radius(r) => r,
        }
    }
}

/// Element layout of a (possibly bent) rectangular array.
///
/// Elements are indexed row-major: element `e` lives in column
/// `e % columns`. Element 0 is the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    rows: usize,
    columns: usize,
    spacing_d: f64,
    curvature: Curvature,
    element_angles: Vec<f64>,
}

impl ArrayGeometry {
    /// A `columns`-element linear array bent to `radius_r` (use
    /// `f64::INFINITY` for a flat sheet).
    pub fn linear(columns: usize, spacing_d: f64, radius_r: f64) -> Result<Self> {
        Self::tile(1, columns, spacing_d, radius_r)
    }

    pub fn tile(rows: usize, columns: usize, spacing_d: f64, radius_r: f64) -> Result<Self> {
        if rows == 0 || columns == 0 {
            return Err(Error::Empty);
        }
        if !(spacing_d > 0.0) || !spacing_d.is_finite() {
            return Err(Error::Config(alloc::format!(
                "element spacing must be positive, got {spacing_d}"
            )));
        }
        let curvature = Curvature::from_radius(radius_r)?;
        let element_angles = column_angles(columns, spacing_d, curvature)?;
        Ok(Self {
            rows,
            columns,
            spacing_d,
            curvature,
            element_angles,
        })
    }

    /// Same sheet, re-bent to a new radius (arc length is preserved).
    pub fn with_radius(&self, radius_r: f64) -> Result<Self> {
        Self::tile(self.rows, self.columns, self.spacing_d, radius_r)
    }

    pub fn n_elements(&self) -> usize {
        self.rows * self.columns
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn spacing(&self) -> f64 {
        self.spacing_d
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    /// Angular position of each column on the arc; all zero when flat.
    pub fn element_angles(&self) -> &[f64] {
        &self.element_angles
    }

    pub fn column_of(&self, element: usize) -> usize {
        element % self.columns
    }

    /// Path delta of `element` relative to the reference element.
    pub fn path_delta(&self, element: usize, theta: f64) -> f64 {
        let column = self.column_of(element);
        match self.curvature {
            Curvature::Flat => column as f64 * self.spacing_d * libm::sin(theta),
            Curvature::Radius(r) => path_delta(r, theta, self.element_angles[column]),
        }
    }

    /// Geometric phase `k * delta_d` of every element.
    pub fn geometric_phases(&self, theta: f64, freq_hz: f64) -> Vec<f64> {
        let k = wavenumber(freq_hz);
        (0..self.n_elements())
            .map(|e| k * self.path_delta(e, theta))
            .collect()
    }
}

fn column_angles(columns: usize, spacing_d: f64, curvature: Curvature) -> Result<Vec<f64>> {
    match curvature {
        Curvature::Flat => Ok(alloc::vec![0.0; columns]),
        Curvature::Radius(r) => {
            let angles: Vec<f64> = (0..columns).map(|n| n as f64 * spacing_d / r).collect();
            // the sheet may not wrap past a full turn
            if angles.last().copied().unwrap_or(0.0) >= 2.0 * PI {
                return Err(Error::InvalidRadius(r));
            }
            Ok(angles)
        }
    }
}

/// Incident plane wave.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveSource {
    aoa_theta: f64,
    freq_rf: f64,
    amplitude: f64,
    element_amplitudes: Vec<f64>,
}

impl PlaneWaveSource {
    pub fn new(aoa_theta: f64, freq_rf: f64, amplitude: f64) -> Result<Self> {
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&aoa_theta) {
            return Err(Error::AngleOutOfRange(aoa_theta));
        }
        if !(freq_rf > 0.0) || !freq_rf.is_finite() {
            return Err(Error::Config(alloc::format!(
                "carrier frequency must be positive, got {freq_rf}"
            )));
        }
        check_amplitude(amplitude)?;
        Ok(Self {
            aoa_theta,
            freq_rf,
            amplitude,
            element_amplitudes: Vec::new(),
        })
    }

    /// Per-element amplitudes overriding the uniform one.
    pub fn with_element_amplitudes(mut self, amplitudes: Vec<f64>) -> Result<Self> {
        for &a in &amplitudes {
            check_amplitude(a)?;
        }
        self.element_amplitudes = amplitudes;
        Ok(self)
    }

    /// Same source seen from another direction.
    pub fn at_angle(&self, aoa_theta: f64) -> Result<Self> {
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&aoa_theta) {
            return Err(Error::AngleOutOfRange(aoa_theta));
        }
        let mut s = self.clone();
        s.aoa_theta = aoa_theta;
        Ok(s)
    }

    pub fn aoa_theta(&self) -> f64 {
        self.aoa_theta
    }

    pub fn freq_rf(&self) -> f64 {
        self.freq_rf
    }

    pub fn wavenumber(&self) -> f64 {
        wavenumber(self.freq_rf)
    }

    pub fn amplitude_of(&self, element: usize) -> f64 {
        self.element_amplitudes
            .get(element)
            .copied()
            .unwrap_or(self.amplitude)
    }

    pub fn element_amplitudes(&self) -> &[f64] {
        &self.element_amplitudes
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

fn check_amplitude(a: f64) -> Result<()> {
    if a >= 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(alloc::format!(
            "amplitude must be finite and non-negative, got {a}"
        )))
    }
}

/// `sum_n w_n A_n exp(j k delta_d_n)`.
///
/// The common factor `exp(-j k R cos(theta))` only rotates the result and is
/// left out.
pub fn array_factor(
    geom: &ArrayGeometry,
    src: &PlaneWaveSource,
    weights: &[Complex64],
) -> Result<Complex64> {
    if weights.len() != geom.n_elements() {
        return Err(Error::LengthMismatch {
            expected: geom.n_elements(),
            actual: weights.len(),
        });
    }
    let k = src.wavenumber();
    let theta = src.aoa_theta();
    Ok(weights
        .iter()
        .enumerate()
        .map(|(e, w)| {
            w * src.amplitude_of(e) * Complex64::from_polar(1.0, k * geom.path_delta(e, theta))
        })
        .sum())
}

/// Magnitude sampled over a uniform grid of angles of arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub angles_deg: Vec<f64>,
    pub values: Vec<f64>,
}

impl Pattern {
    /// Uniform grid over [-90, 90] degrees (both ends included).
    pub fn grid(step_deg: f64) -> Vec<f64> {
        let n = libm::round(180.0 / step_deg) as usize;
        (0..=n)
            .map(|i| {
                let a = -90.0 + i as f64 * step_deg;
                a.min(90.0)
            })
            .collect()
    }

    pub fn sample<F>(step_deg: f64, mut f: F) -> Self
    where
        F: FnMut(f64) -> f64,
    {
        let angles_deg = Self::grid(step_deg);
        let values = angles_deg.iter().map(|&a| f(a.to_radians())).collect();
        Self { angles_deg, values }
    }

    /// Angle of the maximum; ties go to the angle closest to `target_deg`.
    pub fn peak_deg(&self, target_deg: f64) -> Result<f64> {
        if self.values.is_empty() || self.values.len() != self.angles_deg.len() {
            return Err(Error::Empty);
        }
        let max = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let tol = max.abs() * 1e-12;
        self.angles_deg
            .iter()
            .zip(&self.values)
            .filter(|(_, &v)| v >= max - tol)
            .map(|(&a, _)| a)
            .min_by(|a, b| {
                (a - target_deg)
                    .abs()
                    .partial_cmp(&(b - target_deg).abs())
                    .unwrap_or(core::cmp::Ordering::Equal)
            })
            .ok_or(Error::Empty)
    }

    /// Width of the main lobe between its -3 dB (half-power) points, using
    /// linear interpolation between grid samples.
    pub fn half_power_width_deg(&self, target_deg: f64) -> Result<f64> {
        let peak = self.peak_deg(target_deg)?;
        let i_peak = self
            .angles_deg
            .iter()
            .position(|&a| a == peak)
            .ok_or(Error::Empty)?;
        let level = self.values[i_peak] / core::f64::consts::SQRT_2;
        let crossing = |range: &mut dyn Iterator<Item = usize>, step: isize| -> f64 {
            for i in range {
                if self.values[i] < level {
                    let j = (i as isize - step) as usize;
                    let (a0, v0, a1, v1) = (
                        self.angles_deg[j],
                        self.values[j],
                        self.angles_deg[i],
                        self.values[i],
                    );
                    return a0 + (level - v0) * (a1 - a0) / (v1 - v0);
                }
            }
            if step > 0 {
                90.0
            } else {
                -90.0
            }
        };
        let upper = crossing(&mut ((i_peak + 1)..self.values.len()), 1);
        let lower = crossing(&mut (0..i_peak).rev(), -1);
        Ok(upper - lower)
    }
}

/// Angular distance in degrees between the pattern peak and `target_theta`
/// (radians).
pub fn beam_pointing_error(pattern: &Pattern, target_theta: f64) -> Result<f64> {
    let target_deg = target_theta.to_degrees();
    let peak = pattern.peak_deg(target_deg)?;
    Ok((peak - target_deg).abs())
}
