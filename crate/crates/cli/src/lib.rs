//! Config-driven experiment runner around the controller library: parses
//! JSON experiment files, simulates one or all controller modes, and emits
//! trajectory/metrics CSVs plus a comparison summary.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Configuration, IO, or any other failure; exit code 1.
    Failure(String),
    /// A simulation exceeded the blow-up guard; exit code 2.
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Divergence(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Failure(msg) | CliError::Divergence(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<mannsim::Error> for CliError {
    fn from(err: mannsim::Error) -> Self {
        match err {
            mannsim::Error::Divergence { .. } => CliError::Divergence(err.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }
}

/// Verbose progress logging, controlled by the MANNSIM_LOG environment
/// variable (any nonempty value other than "0").
pub fn verbose() -> bool {
    std::env::var("MANNSIM_LOG")
        .map(|v| !v.is_empty() && v != "0")
        .unwrap_or(false)
}
