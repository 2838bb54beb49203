use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("calibration did not converge within {0} ticks")]
    NotConverged(u64),
    #[error("selftest: {0} check(s) failed")]
    SelfTest(usize),
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Usage(_) | HarnessError::Config(_) => 1,
            HarnessError::Io(_) => 2,
            HarnessError::NotConverged(_) => 3,
            HarnessError::SelfTest(_) => 4,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        HarnessError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<escal_core::Error> for HarnessError {
    fn from(e: escal_core::Error) -> Self {
        HarnessError::Config(e.to_string())
    }
}
