//! Extremum-seeking phase calibration.
//!
//! Each loop owns one phase shifter. Per tick it adds a sinusoidal dither
//! from a shared sine table to its code estimate, high-passes the digitized
//! objective, multiplies by the (phase-corrected) table sine and integrates
//! the product into the estimate. Loops run in lockstep against one shared
//! objective sample per tick.

mod calibrator;
mod control;
mod fixed;
mod hpf;
mod init;
mod lut;

pub use calibrator::{
    estimate_psi, run_calibration, CalibrationRun, Calibrator, ConvergenceMonitor, Episode, Plant,
    TickRecord, CONVERGENCE_THRESHOLD, QUIET_WINDOWS, SETTLE_BAND,
};
pub use control::{lut_sine, FrequencyPlan, LoopConfig, LoopState, SelfCalLoop};
pub use fixed::Fx;
pub use hpf::HighPass;
pub use init::{coarse_init, init_phase_codes, COARSE_STRIDE};
pub use lut::{Lut, LutEntry};
