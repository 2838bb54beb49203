//! Deformation trajectories and the tick-driven closed-loop simulation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::beamformer::{objective, BfSample, Digitizer, ObjectiveKind};
use crate::escal::{init_phase_codes, Calibrator, Episode, FrequencyPlan, LoopConfig};
use crate::geometry::{beam_pointing_error, ArrayGeometry, Pattern, PlaneWaveSource};
use crate::signal::{ChannelSettings, NoiseConfig, NoiseStream, Receiver};
use crate::{Error, Result};

/// Curvature radius as a function of tick. An infinite radius is a flat sheet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeformationTrajectory {
    Static {
        r0: f64,
    },
    Step {
        r0: f64,
        r1: f64,
        step_tick: u64,
    },
    Sinusoidal {
        r0: f64,
        vib_amplitude: f64,
        vib_freq: f64,
    },
}

impl DeformationTrajectory {
    pub fn radius_at(&self, tick: u64, tick_s: f64) -> f64 {
        match *self {
            DeformationTrajectory::Static { r0 } => r0,
            DeformationTrajectory::Step { r0, r1, step_tick } => {
                if tick < step_tick {
                    r0
                } else {
                    r1
                }
            }
            DeformationTrajectory::Sinusoidal {
                r0,
                vib_amplitude,
                vib_freq,
            } => r0 + vib_amplitude * libm::sin(2.0 * PI * vib_freq * tick as f64 * tick_s),
        }
    }

    /// Smallest radius the trajectory can reach.
    pub fn min_radius(&self) -> f64 {
        match *self {
            DeformationTrajectory::Static { r0 } => r0,
            DeformationTrajectory::Step { r0, r1, .. } => r0.min(r1),
            DeformationTrajectory::Sinusoidal {
                r0, vib_amplitude, ..
            } => r0 - vib_amplitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |r: f64| r > 0.0;
        let ok = match *self {
            DeformationTrajectory::Static { r0 } => positive(r0),
            DeformationTrajectory::Step { r0, r1, .. } => positive(r0) && positive(r1),
            DeformationTrajectory::Sinusoidal {
                r0,
                vib_amplitude,
                vib_freq,
            } => {
                r0.is_finite()
                    && vib_amplitude >= 0.0
                    && vib_amplitude < r0
                    && vib_freq.is_finite()
                    && vib_freq >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(alloc::format!("invalid trajectory {self:?}")))
        }
    }
}

/// Where the loops start.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum InitMode {
    /// Codes that steer a flat array toward the source.
    #[default]
    Nominal,
    /// Nominal refined by a stride-16 sweep per element at the starting radius.
    Coarse,
    /// Explicit codes for every element.
    Codes(Vec<u8>),
}

/// Everything a closed-loop run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub rows: usize,
    pub columns: usize,
    pub spacing_m: f64,
    pub freq_rf_hz: f64,
    /// `None` means homodyne.
    pub freq_lo_hz: Option<f64>,
    pub aoa_rad: f64,
    pub amplitude: f64,
    pub trajectory: DeformationTrajectory,
    pub phase_mapping: crate::signal::PhaseMapping,
    pub gain_code: u8,
    pub delay_code: u8,
    /// Baseband samples averaged into one objective reading.
    pub dwell: usize,
    pub objective: ObjectiveKind,
    pub init: InitMode,
    pub loops: Vec<LoopConfig>,
    /// Element driven by each loop; element 0 is the reference.
    pub loop_elements: Vec<usize>,
    /// Enable flag and SNR; the stream seed comes from `seed`.
    pub noise: NoiseConfig,
    pub tick_budget: u64,
    pub seed: u64,
    /// End the run once the loops are declared converged.
    pub stop_on_convergence: bool,
    pub pattern_step_deg: f64,
}

impl Scenario {
    /// The 2x2 tile on a 38 cm cylinder with the source at broadside.
    ///
    /// With a 93 mm pitch the bent pair's phase centre tilts by
    /// `d / (2R) = 7.01` degrees, which is the uncompensated pointing error.
    pub fn headline() -> Self {
        Self {
            rows: 2,
            columns: 2,
            spacing_m: 0.093,
            freq_rf_hz: 2.1e9,
            freq_lo_hz: None,
            aoa_rad: 0.0,
            amplitude: 1.0,
            trajectory: DeformationTrajectory::Static { r0: 0.38 },
            phase_mapping: Default::default(),
            gain_code: 0,
            delay_code: 0,
            dwell: 16,
            objective: ObjectiveKind::Magnitude,
            init: InitMode::Nominal,
            loops: LoopConfig::defaults(3, FrequencyPlan::Distinct),
            loop_elements: alloc::vec![1, 2, 3],
            noise: NoiseConfig::default(),
            tick_budget: 20_000,
            seed: 0,
            stop_on_convergence: false,
            pattern_step_deg: 0.1,
        }
    }

    /// The headline tile going from flat to 38 cm at tick 20000.
    pub fn step_flat_to_headline() -> Self {
        Self {
            trajectory: DeformationTrajectory::Step {
                r0: f64::INFINITY,
                r1: 0.38,
                step_tick: 20_000,
            },
            tick_budget: 40_000,
            ..Self::headline()
        }
    }

    pub fn n_elements(&self) -> usize {
        self.rows * self.columns
    }

    pub fn tick_period(&self) -> f64 {
        self.loops
            .first()
            .cloned()
            .unwrap_or_default()
            .tick_period()
    }

    pub fn geometry(&self, radius_r: f64) -> Result<ArrayGeometry> {
        ArrayGeometry::tile(self.rows, self.columns, self.spacing_m, radius_r)
    }

    pub fn source(&self) -> Result<PlaneWaveSource> {
        PlaneWaveSource::new(self.aoa_rad, self.freq_rf_hz, self.amplitude)
    }

    pub fn receiver(&self) -> Receiver {
        Receiver {
            f_lo: self.freq_lo_hz.unwrap_or(self.freq_rf_hz),
            phase_mapping: self.phase_mapping,
        }
    }

    pub fn base_channel(&self) -> Result<ChannelSettings> {
        ChannelSettings::new(0, self.delay_code, self.gain_code)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: alloc::string::String| Err(Error::Config(m));
        let n = self.n_elements();
        if n < 2 {
            return fail(alloc::format!("need at least 2 elements, got {n}"));
        }
        if !(self.spacing_m > 0.0) || !self.spacing_m.is_finite() {
            return fail(alloc::format!(
                "spacing must be positive, got {}",
                self.spacing_m
            ));
        }
        if self.tick_budget == 0 {
            return fail("tick_budget must be > 0".into());
        }
        if self.dwell == 0 {
            return fail("dwell must be > 0".into());
        }
        if !(self.pattern_step_deg > 0.0 && self.pattern_step_deg <= 1.0) {
            return fail(alloc::format!(
                "pattern grid must be in (0, 1] degrees, got {}",
                self.pattern_step_deg
            ));
        }
        if let Some(f) = self.freq_lo_hz {
            if !(f > 0.0) || !f.is_finite() {
                return fail(alloc::format!("LO frequency must be positive, got {f}"));
            }
        }
        if self.loops.len() != self.loop_elements.len() {
            return Err(Error::LengthMismatch {
                expected: self.loops.len(),
                actual: self.loop_elements.len(),
            });
        }
        if self.loops.len() > n - 1 {
            return fail(alloc::format!(
                "{} loops for {} elements",
                self.loops.len(),
                n
            ));
        }
        for (i, &e) in self.loop_elements.iter().enumerate() {
            if e == 0 || e >= n {
                return fail(alloc::format!(
                    "loop {i} drives element {e}; must be 1..{n}"
                ));
            }
            if self.loop_elements[..i].contains(&e) {
                return fail(alloc::format!("element {e} is driven by two loops"));
            }
        }
        for c in &self.loops {
            c.validate()?;
        }
        if let InitMode::Codes(codes) = &self.init {
            if codes.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: codes.len(),
                });
            }
        }
        self.trajectory.validate()?;
        self.geometry(self.trajectory.min_radius())?;
        self.source()?;
        self.base_channel()?;
        self.noise.validate()?;
        Ok(())
    }

    /// Element codes that steer a flat array toward the source.
    pub fn nominal_codes(&self) -> Result<Vec<u8>> {
        let flat = self.geometry(f64::INFINITY)?;
        Ok(self.receiver().steering_codes(&flat, &self.source()?))
    }

    /// Element codes at tick 0.
    pub fn initial_codes(&self) -> Result<Vec<u8>> {
        match &self.init {
            InitMode::Nominal => self.nominal_codes(),
            InitMode::Coarse => {
                let r = self.trajectory.radius_at(0, self.tick_period());
                init_phase_codes(&self.geometry(r)?, &self.source()?, &self.receiver())
            }
            InitMode::Codes(c) => Ok(c.clone()),
        }
    }

    /// Noise-free objective for element codes at radius `r`.
    pub fn objective_at(&self, radius_r: f64, codes: &[u8]) -> Result<f64> {
        let geom = self.geometry(radius_r)?;
        let src = self.source()?;
        self.objective_with(&geom, &src, codes, 0.0, None)
    }

    fn objective_with(
        &self,
        geom: &ArrayGeometry,
        src: &PlaneWaveSource,
        codes: &[u8],
        t0: f64,
        mut noise: Option<&mut NoiseStream>,
    ) -> Result<f64> {
        let base = self.base_channel()?;
        let settings: Vec<ChannelSettings> = codes.iter().map(|&c| base.with_phase(c)).collect();
        let rx = self.receiver();
        let dt = self.tick_period() / self.dwell as f64;
        let mut window = Vec::with_capacity(self.dwell);
        let samples = if noise.is_some() || rx.f_lo != src.freq_rf() {
            self.dwell
        } else {
            // homodyne and noise-free: every sample of the dwell is identical
            1
        };
        for s in 0..samples {
            let t = t0 + s as f64 * dt;
            let v = rx.combined(geom, src, &settings, t, noise.as_deref_mut())?;
            window.push(BfSample::new(v, t));
        }
        Ok(objective(&window, self.objective))
    }

    /// Largest noise-free objective the tile can produce.
    pub fn coherent_max(&self) -> Result<f64> {
        let src = self.source()?;
        let g = self.base_channel()?.gain_linear();
        let sum: f64 = (0..self.n_elements())
            .map(|e| src.amplitude_of(e) * g)
            .sum();
        Ok(match self.objective {
            ObjectiveKind::Power => sum * sum,
            _ => sum,
        })
    }

    pub fn digitizer(&self) -> Result<Digitizer> {
        Digitizer::for_peak(self.coherent_max()?)
    }

    /// Beam-pointing error (degrees) of frozen element codes at radius `r`.
    pub fn pointing_error_deg(&self, radius_r: f64, codes: &[u8]) -> Result<f64> {
        let p = pattern_sweep(self, radius_r, codes, self.pattern_step_deg)?;
        beam_pointing_error(&p, self.aoa_rad)
    }

    /// Pointing error of the nominal (flat-steering) codes at radius `r`.
    pub fn uncompensated_error_deg(&self, radius_r: f64) -> Result<f64> {
        self.pointing_error_deg(radius_r, &self.nominal_codes()?)
    }
}

/// Combined magnitude over the angle-of-arrival grid with frozen codes.
pub fn pattern_sweep(
    scn: &Scenario,
    radius_r: f64,
    codes: &[u8],
    step_deg: f64,
) -> Result<Pattern> {
    if !(step_deg > 0.0 && step_deg <= 1.0) {
        return Err(Error::Config(alloc::format!(
            "pattern grid must be in (0, 1] degrees, got {step_deg}"
        )));
    }
    let geom = scn.geometry(radius_r)?;
    if codes.len() != geom.n_elements() {
        return Err(Error::LengthMismatch {
            expected: geom.n_elements(),
            actual: codes.len(),
        });
    }
    let src = scn.source()?;
    let rx = scn.receiver();
    let base = scn.base_channel()?;
    let settings: Vec<ChannelSettings> = codes.iter().map(|&c| base.with_phase(c)).collect();
    let angles = Pattern::grid(step_deg);
    let mut values = Vec::with_capacity(angles.len());
    for &a in &angles {
        let s = src.at_angle(a.to_radians())?;
        values.push(rx.combined(&geom, &s, &settings, 0.0, None)?.norm());
    }
    Ok(Pattern {
        angles_deg: angles,
        values,
    })
}

/// Angle of arrival, searched outward from broadside in 0.1 degree steps,
/// at which the nominal codes give a pointing error within `tol_deg` of
/// `target_deg` at radius `r`.
pub fn aoa_for_error(
    scn: &Scenario,
    radius_r: f64,
    target_deg: f64,
    tol_deg: f64,
) -> Result<Option<f64>> {
    for i in 0..=600 {
        for sign in [1.0, -1.0] {
            let deg = sign * f64::from(i) * 0.1;
            let probe = Scenario {
                aoa_rad: deg.to_radians(),
                ..scn.clone()
            };
            let err = probe.uncompensated_error_deg(radius_r)?;
            if (err - target_deg).abs() <= tol_deg {
                return Ok(Some(probe.aoa_rad));
            }
            if i == 0 {
                break;
            }
        }
    }
    Ok(None)
}

/// One row of a simulation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub tick: u64,
    pub radius_m: f64,
    /// Loop estimates after this tick.
    pub codes: Vec<u8>,
    /// Loop codes applied during this tick.
    pub perturbed: Vec<u8>,
    /// Raw digitized objective.
    pub objective_q: i16,
    pub demod: Vec<f64>,
    pub accumulator: Vec<f64>,
    /// Pointing error of the estimates after this tick.
    pub error_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_error_deg: f64,
    pub uncompensated_error_deg: f64,
    pub converged: bool,
    /// Tick from which the codes stayed at the values of the first
    /// convergence episode.
    pub ticks_to_converge: Option<u64>,
    pub episodes: Vec<Episode>,
    pub saturation_count: u32,
    /// Codes of every element at the end of the run; loop codes are the
    /// window-mean estimates.
    pub final_codes: Vec<u8>,
    pub initial_codes: Vec<u8>,
    pub final_radius_m: f64,
    pub ticks_run: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trace: Vec<TraceRow>,
    pub summary: RunSummary,
}

/// Runs the closed loop.
///
/// Per tick: evaluate the radius, rebuild the geometry, combine the channels
/// under the applied codes over the dwell window, digitize, and feed every
/// loop. Pointing errors are cached per (radius, codes).
pub fn simulate(scn: &Scenario) -> Result<RunResult> {
    scn.validate()?;
    let src = scn.source()?;
    let digitizer = scn.digitizer()?;
    let ts = scn.tick_period();
    let initial = scn.initial_codes()?;
    let loop_init: Vec<u8> = scn.loop_elements.iter().map(|&e| initial[e]).collect();
    let mut cal = Calibrator::new(scn.loops.clone(), &loop_init)?;
    let mut noise = if scn.noise.enabled {
        let cfg = NoiseConfig {
            seed: scn.seed,
            ..scn.noise
        };
        Some(NoiseStream::new(&cfg, scn.n_elements())?)
    } else {
        None
    };

    let mut errors: BTreeMap<(u64, Vec<u8>), f64> = BTreeMap::new();
    let mut error_of = |r: f64, codes: &[u8]| -> Result<f64> {
        let key = (r.to_bits(), codes.to_vec());
        if let Some(&e) = errors.get(&key) {
            return Ok(e);
        }
        let e = scn.pointing_error_deg(r, codes)?;
        errors.insert(key, e);
        Ok(e)
    };

    let mut geom_cache: Option<(u64, ArrayGeometry)> = None;
    let mut applied = initial.clone();
    let mut estimates = initial.clone();
    let mut trace = Vec::new();
    let mut radius = scn.trajectory.radius_at(0, ts);
    let mut ticks_run = 0;
    for tick in 0..scn.tick_budget {
        radius = scn.trajectory.radius_at(tick, ts);
        let geom = match &geom_cache {
            Some((bits, g)) if *bits == radius.to_bits() => g.clone(),
            _ => {
                let g = scn.geometry(radius)?;
                geom_cache = Some((radius.to_bits(), g.clone()));
                g
            }
        };
        let perturbed = cal.applied_codes().to_vec();
        for (&e, &c) in scn.loop_elements.iter().zip(&perturbed) {
            applied[e] = c;
        }
        let value = scn.objective_with(&geom, &src, &applied, tick as f64 * ts, noise.as_mut())?;
        let q = digitizer.digitize(value)?;
        cal.step(q);
        let codes = cal.exported_codes();
        for (&e, &c) in scn.loop_elements.iter().zip(&codes) {
            estimates[e] = c;
        }
        let error_deg = error_of(radius, &estimates)?;
        trace.push(TraceRow {
            tick,
            radius_m: radius,
            codes,
            perturbed,
            objective_q: q.raw(),
            demod: cal
                .loops()
                .iter()
                .map(|l| l.state().last_demod.to_f64())
                .collect(),
            accumulator: cal
                .loops()
                .iter()
                .map(|l| l.state().accumulator.to_f64())
                .collect(),
            error_deg,
        });
        ticks_run = tick + 1;
        if scn.stop_on_convergence && cal.converged() {
            break;
        }
    }

    let episodes = cal.monitor().episodes().to_vec();
    for (&e, &c) in scn.loop_elements.iter().zip(&cal.mean_codes()) {
        estimates[e] = c;
    }
    let summary = RunSummary {
        final_error_deg: error_of(radius, &estimates)?,
        uncompensated_error_deg: scn.uncompensated_error_deg(radius)?,
        converged: cal.converged(),
        ticks_to_converge: episodes.first().map(|e| e.settled_tick),
        episodes,
        saturation_count: cal.saturations(),
        final_codes: estimates,
        initial_codes: initial,
        final_radius_m: radius,
        ticks_run,
    };
    Ok(RunResult { trace, summary })
}
