use std::fmt;
use std::process::ExitCode;

use ppp_core::error::Error;

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Numeric failure or violated invariant: exit 1.
    Numeric(String),
    /// Bad configuration or arguments: exit 2.
    Config(String),
    /// The configured problem has no solution: exit 3.
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Numeric(_) => 1,
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
        })
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Numeric(format!("cannot write {}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Numeric(m) => write!(f, "error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::InvalidConfig(_) | Error::DimensionMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            Error::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            Error::NotPositiveSemidefinite { .. } | Error::NumericalFailure(_) => CliError::Numeric(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
