use std::process::ExitCode;

use bru_core::engine::EngineError;
use bru_core::report::ReportError;
use bru_core::review::ReviewError;
use bru_core::scoring::ScoringError;
use thiserror::Error;

pub const EXIT_VIOLATIONS: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

/// Command failure, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Data checked and found wrong: exit 1.
    #[error("{0}")]
    Violation(String),
    /// Bad configuration, missing inputs or environment failures: exit 2.
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Violation(_) => EXIT_VIOLATIONS,
            CliError::Config(_) => EXIT_CONFIG,
        })
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(err: EngineError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(err: ReportError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<ScoringError> for CliError {
    fn from(err: ScoringError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<ReviewError> for CliError {
    fn from(err: ReviewError) -> Self {
        match err {
            ReviewError::UnknownItem(_)
            | ReviewError::AbstainedItem(_)
            | ReviewError::UndecidedItem(_)
            | ReviewError::Malformed { .. } => CliError::Violation(err.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
