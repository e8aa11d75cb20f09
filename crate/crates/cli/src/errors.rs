//! Process-level error type carrying the exit-code contract:
//! 0 success, 2 input error, 3 numerical failure.

use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad data, configuration, or file IO: exit code 2.
    #[error("{0}")]
    Input(String),
    /// The numerics failed on valid input: exit code 3.
    #[error("{0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError::Numerical(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(3),
        }
    }
}

impl From<dcmm_core::Error> for CliError {
    fn from(e: dcmm_core::Error) -> Self {
        match e {
            dcmm_core::Error::Input(_) | dcmm_core::Error::Config(_) => {
                CliError::Input(e.to_string())
            }
            dcmm_core::Error::Domain(_) | dcmm_core::Error::Numerical(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
