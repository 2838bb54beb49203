use alloc::string::String;
use thiserror::Error;

/// Errors raised when an operation's preconditions are not met.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("angle {0} rad is outside the allowed range")]
    AngleOutOfRange(f64),
    #[error("{what} code {code} exceeds maximum {max}")]
    CodeOutOfRange {
        what: &'static str,
        code: u32,
        max: u32,
    },
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("input must not be empty")]
    Empty,
    #[error("value is NaN")]
    NotANumber,
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
