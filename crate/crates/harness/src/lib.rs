//! Command-line harness for `escal-core`: scenario files, CSV traces, JSON
//! summaries, parameter sweeps and oracle searches.

pub mod cli;
pub mod config;
pub mod error;
pub mod modes;
pub mod output;
pub mod selftest;

pub use config::ScenarioFile;
pub use error::HarnessError;
pub use modes::{Mode, RunManifest};
