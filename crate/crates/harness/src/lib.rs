//! Configuration, orchestration and reporting for ratio-consensus
//! experiments, plus the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod report;

/// Failures of a harness run, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] ratcon::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest check failed: {0}")]
    Manifest(String),
    #[error("acceptance failed: {0}")]
    Acceptance(String),
}

/// Exit codes of the `ratcon` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const NUMERICAL: i32 = 2;
    pub const ACCEPTANCE: i32 = 3;
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => exit::CONFIG,
            HarnessError::Numerical(_) | HarnessError::Manifest(_) => exit::NUMERICAL,
            HarnessError::Acceptance(_) => exit::ACCEPTANCE,
        }
    }
}
