use alloc::vec::Vec;
use core::f64::consts::PI;

use super::fixed::{shift_round, Fx};
use super::hpf::HighPass;
use super::lut::{Lut, LutEntry};
use crate::beamformer::QWord;
use crate::{Error, Result};

/// Static parameters of one phase-shifter calibration loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    /// Dither frequency of this loop, rad/s.
    pub omega_p: f64,
    /// Rate at which the global LUT is walked one entry per tick; sets the
    /// tick period `Ts = 2 pi / (omega_tick * lut_len)`.
    pub omega_tick: f64,
    pub lut_len: usize,
    pub lut_entry_bits: u32,
    /// HPF corner, rad/s.
    pub hpf_cutoff: f64,
    /// Dither amplitude in output-code LSBs; also scales the accumulator.
    pub a_phi: f64,
    /// Demodulation gain: internal-word LSBs per unit of accumulated product.
    pub a_v: f64,
    /// Demodulation phase correction, radians of this loop's dither.
    pub psi: f64,
    pub code_bits_internal: u32,
    pub code_bits_output: u32,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            omega_p: 30.0,
            omega_tick: 30.0,
            lut_len: 128,
            lut_entry_bits: 17,
            hpf_cutoff: 5.0,
            a_phi: 15.0,
            a_v: 1.0,
            psi: 0.0,
            code_bits_internal: 16,
            code_bits_output: 8,
        }
    }
}

/// How dither frequencies are assigned when several loops share one
/// objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyPlan {
    /// Every loop dithers at `omega_p` with the same LUT phase.
    Shared,
    /// Loop `i` dithers at `(1 + i/4) * omega_p`.
    #[default]
    Distinct,
}

impl FrequencyPlan {
    pub fn ratio(self, loop_index: usize) -> f64 {
        match self {
            FrequencyPlan::Shared => 1.0,
            FrequencyPlan::Distinct => 1.0 + 0.25 * loop_index as f64,
        }
    }
}

impl LoopConfig {
    /// Loop gains 15, 20, 25 (then +5 per extra loop) at 30 rad/s.
    pub fn defaults(n_loops: usize, plan: FrequencyPlan) -> Vec<LoopConfig> {
        (0..n_loops)
            .map(|i| {
                let base = LoopConfig::default();
                LoopConfig {
                    omega_p: base.omega_tick * plan.ratio(i),
                    a_phi: 15.0 + 5.0 * i as f64,
                    ..base
                }
            })
            .collect()
    }

    pub fn tick_period(&self) -> f64 {
        2.0 * PI / (self.omega_tick * self.lut_len as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::Config(msg));
        if !(self.omega_tick > 0.0) || !self.omega_tick.is_finite() {
            return fail(alloc::format!(
                "omega_tick must be positive, got {}",
                self.omega_tick
            ));
        }
        if !(self.hpf_cutoff >= 0.0) || !self.hpf_cutoff.is_finite() {
            return fail(alloc::format!(
                "HPF cutoff must be >= 0, got {}",
                self.hpf_cutoff
            ));
        }
        if !(self.omega_p > self.hpf_cutoff) || !self.omega_p.is_finite() {
            return fail(alloc::format!(
                "perturbation frequency {} must exceed the HPF cutoff {}",
                self.omega_p,
                self.hpf_cutoff
            ));
        }
        // keep the dither below Nyquist of the tick rate
        if self.omega_p / self.omega_tick > self.lut_len as f64 / 4.0 {
            return fail(alloc::format!(
                "omega_p {} is too fast for the tick rate",
                self.omega_p
            ));
        }
        if !(4..=1 << 14).contains(&self.lut_len) {
            return fail(alloc::format!(
                "lut_len must be 4..=16384, got {}",
                self.lut_len
            ));
        }
        if !(3..=24).contains(&self.lut_entry_bits) {
            return fail(alloc::format!(
                "lut_entry_bits must be 3..=24, got {}",
                self.lut_entry_bits
            ));
        }
        if !(1..=8).contains(&self.code_bits_output)
            || self.code_bits_internal <= self.code_bits_output
            || self.code_bits_internal > 24
        {
            return fail(alloc::format!(
                "code widths {} / {} are not supported",
                self.code_bits_internal,
                self.code_bits_output
            ));
        }
        if !self.a_phi.is_finite() || !(self.a_phi >= 0.0) || self.a_phi > 1024.0 {
            return fail(alloc::format!(
                "a_phi must be in [0, 1024], got {}",
                self.a_phi
            ));
        }
        if !self.a_v.is_finite() || self.a_v.abs() > 1e6 {
            return fail(alloc::format!("a_v must be finite, got {}", self.a_v));
        }
        if !self.psi.is_finite() {
            return fail(alloc::format!("psi must be finite, got {}", self.psi));
        }
        Ok(())
    }
}

/// Sine-table entry `index` for `cfg`.
pub fn lut_sine(cfg: &LoopConfig, index: usize) -> Result<LutEntry> {
    Lut::new(cfg.lut_len, cfg.lut_entry_bits)?.get(index)
}

/// Mutable state of one loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopState {
    /// NCO phase in LUT entries, 16 fractional bits.
    pub lut_phase: u32,
    pub hpf: HighPass,
    pub accumulator: Fx,
    /// Internal code word; the top `code_bits_output` bits drive the shifter.
    pub code_estimate: u32,
    pub init_word: u32,
    pub iteration: u64,
    pub last_demod: Fx,
    pub saturations: u32,
}

impl LoopState {
    pub fn lut_index(&self) -> usize {
        (self.lut_phase >> 16) as usize
    }
}

/// One calibration loop: configuration, derived constants and state.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfCalLoop {
    cfg: LoopConfig,
    lut: Lut,
    state: LoopState,
    phase_step: u32,
    phase_modulus: u32,
    psi_phase: u32,
    /// a_phi in internal-word LSBs, 8 extra fractional bits.
    dither_gain: i64,
    /// a_phi * a_v, Q16.
    acc_gain: i64,
    frac_bits: u32,
}

impl SelfCalLoop {
    pub fn new(cfg: LoopConfig, init_code: u8) -> Result<Self> {
        cfg.validate()?;
        if u32::from(init_code) >> cfg.code_bits_output != 0 {
            return Err(Error::CodeOutOfRange {
                what: "initial phase",
                code: u32::from(init_code),
                max: (1 << cfg.code_bits_output) - 1,
            });
        }
        let lut = Lut::new(cfg.lut_len, cfg.lut_entry_bits)?;
        let phase_modulus = (cfg.lut_len as u32) << 16;
        let phase_step = libm::round(cfg.omega_p / cfg.omega_tick * 65536.0) as u32 % phase_modulus;
        let psi_entries = cfg.psi / (2.0 * PI) * cfg.lut_len as f64;
        let psi_phase = libm::round(psi_entries * 65536.0) as i64;
        let psi_phase = psi_phase.rem_euclid(i64::from(phase_modulus)) as u32;
        let frac_bits = cfg.code_bits_internal - cfg.code_bits_output;
        let dither_gain = libm::round(cfg.a_phi * f64::from(1u32 << (frac_bits + 8))) as i64;
        let acc_gain = libm::round(cfg.a_phi * cfg.a_v * 65536.0) as i64;
        let init_word = u32::from(init_code) << frac_bits;
        let state = LoopState {
            lut_phase: 0,
            hpf: HighPass::new(cfg.hpf_cutoff, cfg.tick_period()),
            accumulator: Fx::ZERO,
            code_estimate: init_word,
            init_word,
            iteration: 0,
            last_demod: Fx::ZERO,
            saturations: 0,
        };
        Ok(Self {
            cfg,
            lut,
            state,
            phase_step,
            phase_modulus,
            psi_phase,
            dither_gain,
            acc_gain,
            frac_bits,
        })
    }

    pub fn config(&self) -> &LoopConfig {
        &self.cfg
    }

    pub fn state(&self) -> &LoopState {
        &self.state
    }

    pub fn lut(&self) -> &Lut {
        &self.lut
    }

    fn internal_mask(&self) -> u32 {
        ((1u64 << self.cfg.code_bits_internal) - 1) as u32
    }

    fn output_mask(&self) -> i64 {
        (1i64 << self.cfg.code_bits_output) - 1
    }

    /// Rounds an internal word to the output code, wrapping modulo one turn.
    fn to_output(&self, word: i64) -> u8 {
        let half = 1i64 << (self.frac_bits - 1);
        (((word + half) >> self.frac_bits) & self.output_mask()) as u8
    }

    /// The current estimate without dither, as an output code.
    pub fn exported_code(&self) -> u8 {
        self.to_output(i64::from(self.state.code_estimate))
    }

    /// Estimate in output-code units including the sub-LSB fraction.
    pub fn estimate_codes(&self) -> f64 {
        f64::from(self.state.code_estimate) / f64::from(1u32 << self.frac_bits)
    }

    /// Dither `a_phi * sin` at LUT position `index`, in internal-word LSBs.
    fn dither_at(&self, index: usize) -> i64 {
        let raw = i64::from(self.lut.raw(index));
        shift_round(self.dither_gain * raw, self.lut.unit_bits() + 8)
    }

    /// Output code applied to the shifter for the current LUT position.
    pub fn perturbed_code(&self) -> u8 {
        let word = i64::from(self.state.code_estimate) + self.dither_at(self.state.lut_index());
        self.to_output(word)
    }

    /// Multiplies the HPF output by the LUT sine at `index` shifted by psi.
    pub fn demodulate(&self, hpf_out: Fx, index: usize) -> Fx {
        self.demodulate_checked(hpf_out, index).0
    }

    fn demodulate_checked(&self, hpf_out: Fx, index: usize) -> (Fx, bool) {
        let shifted = ((index as u32) << 16).wrapping_add(self.psi_phase) % self.phase_modulus;
        let reference = i64::from(self.lut.raw((shifted >> 16) as usize));
        Fx::saturate(shift_round(
            i64::from(hpf_out.raw()) * reference,
            self.lut.unit_bits(),
        ))
    }

    /// Adds one demodulated product and refreshes the code estimate.
    /// The accumulator saturates; the code word wraps modulo one phase turn.
    pub fn accumulate(&mut self, demod: Fx) -> u32 {
        let sum = i64::from(self.state.accumulator.raw()) + i64::from(demod.raw());
        let (acc, sat) = Fx::saturate(sum);
        if sat {
            self.state.saturations += 1;
        }
        self.state.accumulator = acc;
        let delta = shift_round(self.acc_gain * i64::from(acc.raw()), 32);
        let word = i64::from(self.state.init_word) + delta;
        self.state.code_estimate = (word & i64::from(self.internal_mask())) as u32;
        self.state.code_estimate
    }

    /// One tick: advance the LUT, high-pass the objective produced by the
    /// previous tick's code, demodulate against the new LUT position,
    /// accumulate, and return the next perturbed output code.
    pub fn step(&mut self, bf_word: QWord) -> u8 {
        self.state.lut_phase = (self.state.lut_phase + self.phase_step) % self.phase_modulus;
        let index = self.state.lut_index();
        let (h, sat) = self.state.hpf.step(Fx::from_qword(bf_word));
        if sat {
            self.state.saturations += 1;
        }
        let (d, sat) = self.demodulate_checked(h, index);
        if sat {
            self.state.saturations += 1;
        }
        self.state.last_demod = d;
        self.accumulate(d);
        self.state.iteration += 1;
        self.perturbed_code()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_loop_gains() {
        let loops = LoopConfig::defaults(3, FrequencyPlan::Shared);
        let gains: Vec<f64> = loops.iter().map(|c| c.a_phi).collect();
        assert_eq!(gains, [15.0, 20.0, 25.0]);
        assert!(loops.iter().all(|c| c.omega_p == 30.0));
        let distinct = LoopConfig::defaults(3, FrequencyPlan::Distinct);
        let w: Vec<f64> = distinct.iter().map(|c| c.omega_p).collect();
        assert_eq!(w, [30.0, 37.5, 45.0]);
    }

    #[test]
    fn tick_period_is_one_lut_entry() {
        let c = LoopConfig::default();
        assert!((c.tick_period() - 1.636_246_173_744_684e-3).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let mut c = LoopConfig::default();
        assert!(c.validate().is_ok());
        c.hpf_cutoff = 40.0;
        assert!(c.validate().is_err());
        let c = LoopConfig {
            code_bits_output: 9,
            ..LoopConfig::default()
        };
        assert!(c.validate().is_err());
        let c = LoopConfig {
            a_v: f64::NAN,
            ..LoopConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn lut_sine_entries() {
        let c = LoopConfig::default();
        assert_eq!(lut_sine(&c, 0).unwrap().value(), 0.0);
        assert_eq!(lut_sine(&c, 32).unwrap().value(), 1.0);
        assert_eq!(lut_sine(&c, 16).unwrap().signed(), 23170);
        assert!(lut_sine(&c, 128).is_err());
    }

    #[test]
    fn first_tick_applies_dither_only() {
        let mut l = SelfCalLoop::new(LoopConfig::default(), 100).unwrap();
        let code = l.step(QWord::quantize(20.0).unwrap());
        // 100 + 15 * sin(2 pi / 128) = 100.736, rounded
        assert_eq!(code, 101);
        assert_eq!(l.state().accumulator, Fx::ZERO);
        assert_eq!(l.exported_code(), 100);
    }

    #[test]
    fn zero_demod_leaves_estimate() {
        let mut l = SelfCalLoop::new(LoopConfig::default(), 40).unwrap();
        for _ in 0..500 {
            l.accumulate(Fx::ZERO);
        }
        assert_eq!(l.exported_code(), 40);
        assert_eq!(l.state().code_estimate, 40 << 8);
    }

    #[test]
    fn constant_demod_ramps_linearly() {
        let mut l = SelfCalLoop::new(LoopConfig::default(), 0).unwrap();
        let d = Fx::from_f64(1.0 / 16.0);
        let mut words = Vec::new();
        for _ in 0..64 {
            words.push(l.accumulate(d));
        }
        // a_phi * a_v * n / 16 internal LSBs
        for (n, &w) in words.iter().enumerate() {
            let expected = libm::round(15.0 * (n + 1) as f64 / 16.0) as u32;
            assert_eq!(w, expected);
        }
    }

    #[test]
    fn code_word_wraps_modulo_one_turn() {
        let mut l = SelfCalLoop::new(LoopConfig::default(), 0).unwrap();
        l.accumulate(Fx::from_f64(-256.0 / 15.0));
        assert_eq!(l.exported_code(), 255);
    }

    #[test]
    fn perturbation_wraps_below_zero() {
        let mut l = SelfCalLoop::new(LoopConfig::default(), 0).unwrap();
        let mut seen_high = false;
        for _ in 0..128 {
            let c = l.step(QWord::default());
            if c > 200 {
                seen_high = true;
                assert!(c >= 241);
            } else {
                assert!(c <= 15);
            }
        }
        assert!(seen_high);
    }

    #[test]
    fn demodulate_zero_and_in_phase() {
        let l = SelfCalLoop::new(LoopConfig::default(), 0).unwrap();
        assert_eq!(l.demodulate(Fx::ZERO, 17), Fx::ZERO);
        let mean: f64 = (0..128)
            .map(|i| {
                let h = Fx::from_f64(libm::sin(2.0 * PI * i as f64 / 128.0));
                l.demodulate(h, i).to_f64()
            })
            .sum::<f64>()
            / 128.0;
        assert!((mean - 0.5).abs() < 1e-3, "{mean}");
    }

    #[test]
    fn psi_shifts_reference() {
        let cfg = LoopConfig {
            psi: PI / 2.0,
            ..LoopConfig::default()
        };
        let l = SelfCalLoop::new(cfg, 0).unwrap();
        // sin at index 0 shifted by a quarter period is the peak
        assert_eq!(l.demodulate(Fx::ONE, 0), Fx::ONE);
    }
}
