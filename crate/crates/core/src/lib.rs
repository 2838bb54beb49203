//! Behavioral model of a conformal (bendable) phased-array receive tile and
//! the extremum-seeking loop that recalibrates its phase shifters when the
//! sheet deforms.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, the command line or text formats lives in `escal-harness`.
//!
//! Module map:
//!
//! * [`geometry`]: element placement on a cylinder of radius R, path-length
//!   deltas, array factor and beam-pointing error.
//! * [`signal`]: per-channel receive model with quantized phase, delay and
//!   gain words and optional complex Gaussian noise.
//! * [`beamformer`]: channel combining and the 16-bit `QWord` digitization.
//! * [`escal`]: the perturb-and-observe / extremum-seeking calibration loops.
//! * [`scenario`]: deformation trajectories and the tick-driven simulation.
//! * [`oracle`]: brute-force code searches used to grade the loops.

#![no_std]
// `!(x > 0.0)` is how validation rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod beamformer;
mod error;
pub mod escal;
pub mod geometry;
pub mod oracle;
pub mod scenario;
pub mod signal;

pub use error::{Error, Result};

pub use num_complex::Complex64;
