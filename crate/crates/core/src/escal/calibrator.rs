use alloc::vec::Vec;
use core::f64::consts::PI;

use super::control::{LoopConfig, SelfCalLoop};
use super::fixed::Fx;
use crate::beamformer::QWord;
use crate::oracle::code_distance;
use crate::{Error, Result};

/// Quiet-window threshold on the mean demodulated product, objective units.
pub const CONVERGENCE_THRESHOLD: f64 = 1.0 / 256.0;
/// Consecutive quiet windows required to declare convergence.
pub const QUIET_WINDOWS: u32 = 5;
/// Codes within this circular distance of their converged value count as
/// settled; the integrator keeps a ripple of up to about 2 LSB at steady state.
pub const SETTLE_BAND: u8 = 2;

const MAX_WINDOW: u64 = 1 << 16;

/// Source of the digitized objective for a set of applied loop codes.
pub trait Plant {
    fn observe(&mut self, tick: u64, codes: &[u8]) -> Result<QWord>;
}

impl<F> Plant for F
where
    F: FnMut(u64, &[u8]) -> Result<QWord>,
{
    fn observe(&mut self, tick: u64, codes: &[u8]) -> Result<QWord> {
        self(tick, codes)
    }
}

/// A stretch of quiet windows long enough to count as converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Episode {
    /// First tick of the first quiet window.
    pub start_tick: u64,
    /// Tick at which the last required quiet window closed.
    pub detected_tick: u64,
    /// Tick from which every exported code stayed within [`SETTLE_BAND`]
    /// of its window-mean value at detection.
    pub settled_tick: u64,
}

/// Tracks the per-window mean of every loop's demodulated product.
///
/// The window is the common period of all dithers, so cross products
/// between loops at different frequencies average out within it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceMonitor {
    window: u64,
    threshold_raw: i64,
    sums: Vec<i64>,
    filled: u64,
    quiet_run: u32,
    run_start: u64,
    converged: bool,
    episodes: Vec<Episode>,
}

impl ConvergenceMonitor {
    pub fn new(window: u64, n_loops: usize) -> Self {
        Self {
            window: window.max(1),
            threshold_raw: Fx::from_f64(CONVERGENCE_THRESHOLD).raw().into(),
            sums: alloc::vec![0; n_loops],
            filled: 0,
            quiet_run: 0,
            run_start: 0,
            converged: false,
            episodes: Vec::new(),
        }
    }

    /// Window length in ticks for a set of loops: the least common multiple
    /// of the dither periods.
    pub fn window_for(configs: &[LoopConfig]) -> u64 {
        configs.iter().fold(1u64, |acc, c| {
            let modulus = (c.lut_len as u64) << 16;
            let step = (libm::round(c.omega_p / c.omega_tick * 65536.0) as u64) % modulus;
            let period = if step == 0 {
                1
            } else {
                modulus / gcd(modulus, step)
            };
            lcm(acc, period).min(MAX_WINDOW)
        })
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    /// Feeds the demodulated products of tick `tick`.
    pub fn push(&mut self, tick: u64, demods: &[Fx]) {
        for (s, d) in self.sums.iter_mut().zip(demods) {
            *s += i64::from(d.raw());
        }
        self.filled += 1;
        if self.filled < self.window {
            return;
        }
        let limit = self.threshold_raw * self.window as i64;
        let quiet = self.sums.iter().all(|s| s.abs() < limit);
        let window_start = tick + 1 - self.window;
        if quiet {
            if self.quiet_run == 0 {
                self.run_start = window_start;
            }
            self.quiet_run += 1;
            if self.quiet_run == QUIET_WINDOWS {
                self.converged = true;
                self.episodes.push(Episode {
                    start_tick: self.run_start,
                    detected_tick: tick + 1,
                    settled_tick: self.run_start,
                });
            }
        } else {
            self.quiet_run = 0;
            self.converged = false;
        }
        self.sums.iter_mut().for_each(|s| *s = 0);
        self.filled = 0;
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    fn last_episode_mut(&mut self) -> Option<&mut Episode> {
        self.episodes.last_mut()
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// A set of loops advanced in lockstep against one objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibrator {
    loops: Vec<SelfCalLoop>,
    monitor: ConvergenceMonitor,
    applied: Vec<u8>,
    exported: Vec<u8>,
    /// Exported codes per tick since the previous detection, row-major.
    history: Vec<u8>,
    history_start: u64,
    /// Per-loop estimate at the start of the current window, and the summed
    /// wrapped offsets from it.
    ripple_ref: Vec<f64>,
    ripple_sum: Vec<f64>,
    ripple_n: u64,
    window_means: Option<Vec<u8>>,
    tick: u64,
}

impl Calibrator {
    pub fn new(configs: Vec<LoopConfig>, init_codes: &[u8]) -> Result<Self> {
        if configs.len() != init_codes.len() {
            return Err(Error::LengthMismatch {
                expected: configs.len(),
                actual: init_codes.len(),
            });
        }
        if let Some(first) = configs.first() {
            let shared = configs.iter().all(|c| {
                c.omega_tick == first.omega_tick
                    && c.lut_len == first.lut_len
                    && c.lut_entry_bits == first.lut_entry_bits
            });
            if !shared {
                return Err(Error::Config(
                    "all loops must share the tick rate and sine table".into(),
                ));
            }
        }
        let monitor =
            ConvergenceMonitor::new(ConvergenceMonitor::window_for(&configs), configs.len());
        let loops = configs
            .into_iter()
            .zip(init_codes)
            .map(|(c, &code)| SelfCalLoop::new(c, code))
            .collect::<Result<Vec<_>>>()?;
        let applied = loops.iter().map(SelfCalLoop::perturbed_code).collect();
        let exported = loops.iter().map(SelfCalLoop::exported_code).collect();
        let ripple_ref = loops.iter().map(SelfCalLoop::estimate_codes).collect();
        let ripple_sum = alloc::vec![0.0; loops.len()];
        Ok(Self {
            loops,
            monitor,
            applied,
            exported,
            history: Vec::new(),
            history_start: 0,
            ripple_ref,
            ripple_sum,
            ripple_n: 0,
            window_means: None,
            tick: 0,
        })
    }

    pub fn loops(&self) -> &[SelfCalLoop] {
        &self.loops
    }

    /// Codes to apply during the current tick (estimate plus dither).
    pub fn applied_codes(&self) -> &[u8] {
        &self.applied
    }

    /// Current estimates without dither.
    pub fn exported_codes(&self) -> Vec<u8> {
        self.exported.clone()
    }

    /// Circular mean of each estimate over the last complete window,
    /// rounded; the instantaneous codes before the first window closes.
    ///
    /// The integrator leaves a zero-mean ripple of one or two LSBs on the
    /// estimate, so the mean is the better readout of where a loop sits.
    pub fn mean_codes(&self) -> Vec<u8> {
        self.window_means
            .clone()
            .unwrap_or_else(|| self.exported.clone())
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn converged(&self) -> bool {
        self.monitor.converged()
    }

    pub fn monitor(&self) -> &ConvergenceMonitor {
        &self.monitor
    }

    pub fn saturations(&self) -> u32 {
        self.loops.iter().map(|l| l.state().saturations).sum()
    }

    fn track_ripple(&mut self) {
        for ((l, r), sum) in self
            .loops
            .iter()
            .zip(&self.ripple_ref)
            .zip(self.ripple_sum.iter_mut())
        {
            let turn = f64::from(1u32 << l.config().code_bits_output);
            let d = l.estimate_codes() - r;
            *sum += d - turn * libm::round(d / turn);
        }
        self.ripple_n += 1;
    }

    fn close_ripple_window(&mut self) {
        let n = self.ripple_n.max(1) as f64;
        let means = self
            .loops
            .iter()
            .zip(&self.ripple_ref)
            .zip(&self.ripple_sum)
            .map(|((l, r), sum)| {
                let turn = 1i64 << l.config().code_bits_output;
                (libm::round(r + sum / n) as i64).rem_euclid(turn) as u8
            })
            .collect();
        self.window_means = Some(means);
        self.ripple_ref = self.loops.iter().map(SelfCalLoop::estimate_codes).collect();
        self.ripple_sum.iter_mut().for_each(|s| *s = 0.0);
        self.ripple_n = 0;
    }

    /// First tick after the last excursion outside the settle band. Ticks
    /// before the recorded history count as settled only if it is empty.
    fn settled_tick(&self) -> u64 {
        let n = self.exported.len().max(1);
        let reference = self.mean_codes();
        let last_out = self.history.chunks(n).rposition(|row| {
            row.iter()
                .zip(&reference)
                .any(|(&c, &f)| code_distance(c, f) > SETTLE_BAND)
        });
        match last_out {
            Some(i) => self.history_start + i as u64 + 1,
            None => self.history_start,
        }
    }

    /// Feeds the objective observed under [`Self::applied_codes`] to every loop.
    pub fn step(&mut self, bf_word: QWord) -> &[u8] {
        for (l, code) in self.loops.iter_mut().zip(self.applied.iter_mut()) {
            *code = l.step(bf_word);
        }
        for (e, l) in self.exported.iter_mut().zip(&self.loops) {
            *e = l.exported_code();
        }
        self.history.extend_from_slice(&self.exported);
        self.track_ripple();
        let demods: Vec<Fx> = self.loops.iter().map(|l| l.state().last_demod).collect();
        let before = self.monitor.episodes().len();
        self.monitor.push(self.tick, &demods);
        if (self.tick + 1).is_multiple_of(self.monitor.window()) {
            self.close_ripple_window();
        }
        if self.monitor.episodes().len() > before {
            let settled = self.settled_tick();
            if let Some(ep) = self.monitor.last_episode_mut() {
                ep.settled_tick = settled;
            }
            self.history.clear();
            self.history_start = self.tick + 1;
        }
        self.tick += 1;
        &self.applied
    }
}

/// One row of a calibration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    /// Estimates after this tick's update.
    pub codes: Vec<u8>,
    /// Codes applied while the objective was observed.
    pub perturbed: Vec<u8>,
    pub objective: QWord,
    pub demod: Vec<f64>,
    pub accumulator: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRun {
    pub records: Vec<TickRecord>,
    pub converged: bool,
    /// Settling tick of the first convergence episode.
    pub ticks_to_converge: Option<u64>,
    pub episodes: Vec<Episode>,
    pub final_codes: Vec<u8>,
    pub saturations: u32,
}

/// Runs `configs` against `plant` for at most `budget` ticks.
///
/// Exhausting the budget is not an error; the run is reported as not
/// converged.
pub fn run_calibration<P: Plant + ?Sized>(
    configs: Vec<LoopConfig>,
    init_codes: &[u8],
    plant: &mut P,
    budget: u64,
    stop_on_convergence: bool,
) -> Result<CalibrationRun> {
    let mut cal = Calibrator::new(configs, init_codes)?;
    let mut records = Vec::new();
    for tick in 0..budget {
        let perturbed = cal.applied_codes().to_vec();
        let objective = plant.observe(tick, &perturbed)?;
        cal.step(objective);
        records.push(TickRecord {
            tick,
            codes: cal.exported_codes(),
            perturbed,
            objective,
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
        });
        if stop_on_convergence && cal.converged() {
            break;
        }
    }
    let episodes = cal.monitor().episodes().to_vec();
    Ok(CalibrationRun {
        records,
        converged: cal.converged(),
        ticks_to_converge: episodes.first().map(|e| e.settled_tick),
        episodes,
        final_codes: cal.mean_codes(),
        saturations: cal.saturations(),
    })
}

/// Pilot estimate of the demodulation phase correction.
///
/// Holds the estimate at `center` (no accumulation), applies the dither for
/// `periods` table periods and correlates the high-passed response against
/// every shift of the table sine. Of the two shifts a half period apart that
/// maximize the correlation magnitude, the one closer to zero is returned,
/// since the gradient sign at `center` is unknown.
pub fn estimate_psi<F>(cfg: &LoopConfig, center: u8, periods: u32, mut objective: F) -> Result<f64>
where
    F: FnMut(u8) -> Result<QWord>,
{
    let pilot_cfg = LoopConfig {
        a_v: 0.0,
        psi: 0.0,
        ..cfg.clone()
    };
    let mut l = SelfCalLoop::new(pilot_cfg, center)?;
    let len = cfg.lut_len;
    let settle = len as u64;
    let total = settle + u64::from(periods.max(1)) * len as u64;
    let mut samples = Vec::new();
    let mut code = l.perturbed_code();
    for n in 0..total {
        code = l.step(objective(code)?);
        if n >= settle {
            samples.push((l.state().hpf.output().raw(), l.state().lut_index()));
        }
    }
    let corr = |s: usize| -> f64 {
        samples
            .iter()
            .map(|&(h, i)| f64::from(h) * f64::from(l.lut().raw(i + s)))
            .sum()
    };
    let best = (0..len)
        .map(|s| (s, libm::fabs(corr(s))))
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        );
    if !(best.1 > 0.0) {
        return Err(Error::Config(
            "pilot saw no response; move the center off the extremum".into(),
        ));
    }
    let s = best.0 % (len / 2);
    let s = if s > len / 4 {
        s as f64 - (len / 2) as f64
    } else {
        s as f64
    };
    Ok(2.0 * PI * s / len as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::escal::control::FrequencyPlan;

    #[test]
    fn window_is_common_period() {
        let shared = LoopConfig::defaults(3, FrequencyPlan::Shared);
        assert_eq!(ConvergenceMonitor::window_for(&shared), 128);
        let distinct = LoopConfig::defaults(3, FrequencyPlan::Distinct);
        assert_eq!(ConvergenceMonitor::window_for(&distinct), 512);
    }

    #[test]
    fn monitor_declares_after_quiet_windows() {
        let mut m = ConvergenceMonitor::new(4, 1);
        for t in 0..4 * u64::from(QUIET_WINDOWS) {
            assert!(!m.converged());
            m.push(t, &[Fx::ZERO]);
        }
        assert!(m.converged());
        assert_eq!(
            m.episodes(),
            &[Episode {
                start_tick: 0,
                detected_tick: 20,
                settled_tick: 0
            }]
        );
        for t in 20..24 {
            m.push(t, &[Fx::ONE]);
        }
        assert!(!m.converged());
    }

    #[test]
    fn rejects_mismatched_tables() {
        let mut cfgs = LoopConfig::defaults(2, FrequencyPlan::Shared);
        cfgs[1].lut_len = 64;
        assert!(Calibrator::new(cfgs, &[0, 0]).is_err());
        assert!(Calibrator::new(LoopConfig::defaults(2, FrequencyPlan::Shared), &[0]).is_err());
    }

    #[test]
    fn flat_objective_converges_immediately() {
        let mut plant = |_t: u64, _c: &[u8]| Ok(QWord::quantize(10.0).unwrap());
        let run = run_calibration(
            LoopConfig::defaults(1, FrequencyPlan::Shared),
            &[0],
            &mut plant,
            5000,
            true,
        )
        .unwrap();
        assert!(run.converged);
        assert_eq!(run.ticks_to_converge, Some(0));
        assert_eq!(run.final_codes, [0]);
    }

    fn parabola(opt: f64) -> impl FnMut(u8) -> Result<QWord> {
        move |c: u8| {
            let x = f64::from(c) - opt;
            QWord::quantize(20.0 - x * x / 400.0)
        }
    }

    #[test]
    fn single_loop_climbs_parabola() {
        let mut f = parabola(90.0);
        let mut plant = |_t: u64, c: &[u8]| f(c[0]);
        let run = run_calibration(
            LoopConfig::defaults(1, FrequencyPlan::Shared),
            &[60],
            &mut plant,
            30_000,
            true,
        )
        .unwrap();
        assert!(run.converged);
        let err = (i32::from(run.final_codes[0]) - 90).abs();
        assert!(err <= 2, "{:?}", run.final_codes);
        assert_eq!(run.saturations, 0);
    }

    #[test]
    fn psi_near_zero_without_latency() {
        let cfg = LoopConfig::default();
        let psi = estimate_psi(&cfg, 60, 4, parabola(90.0)).unwrap();
        assert!(psi.abs() < 0.35, "{psi}");
    }

    #[test]
    fn psi_tracks_added_latency() {
        let cfg = LoopConfig::default();
        let base = estimate_psi(&cfg, 60, 4, parabola(90.0)).unwrap();
        let mut f = parabola(90.0);
        let mut history = alloc::collections::VecDeque::from(alloc::vec![60u8; 8]);
        let delayed = move |c: u8| {
            history.push_back(c);
            f(history.pop_front().unwrap())
        };
        let psi = estimate_psi(&cfg, 60, 4, delayed).unwrap();
        // 8 ticks is 8 table entries, a quarter of the shift range
        let expected = base - 2.0 * PI * 8.0 / 128.0;
        assert!((psi - expected).abs() < 0.1, "{psi} vs {expected}");
    }
}
