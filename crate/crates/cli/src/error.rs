//! Error taxonomy for the CLI, bucketed by whose fault the failure is and
//! mapped onto stable process exit codes: configuration problems exit 2,
//! input-data problems exit 3, and internal failures exit 4 (0 is success).

use std::fmt;

/// A failure classified for exit-code and `error.json` reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Unreadable or contradictory configuration, including bad flag values.
    Config(String),
    /// Input data that fails its schema or is inconsistent with the config.
    Data(String),
    /// Everything else: unexpected module failures, output I/O trouble.
    Internal(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    /// Stable lowercase tag used in `error.json` records.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

/// Classifies an underlying error as a configuration problem.
pub fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Classifies an underlying error as an input-data problem.
pub fn data_err(e: impl fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Classifies an underlying error as an internal failure.
pub fn internal_err(e: impl fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}
