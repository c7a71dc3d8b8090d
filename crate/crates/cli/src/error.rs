//! CLI-level errors carrying the process exit code.

use std::fmt;

/// What went wrong, bucketed by exit code: usage 1, input 2, internal 3.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: conflicting flags, invalid parameter values,
    /// malformed config file.
    Usage(String),
    /// Input data failed validation or could not be read.
    Input(String),
    /// Everything else: solver failures on validated data, output IO.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Input(msg) => write!(f, "{msg}"),
            CliError::Internal(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<semff_core::CoreError> for CliError {
    fn from(e: semff_core::CoreError) -> Self {
        CliError::Internal(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
