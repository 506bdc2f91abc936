//! Configuration-driven front end for the qline library.

pub mod commands;
pub mod output;
pub mod scenario;
pub mod units;

use thiserror::Error;

pub use commands::{run, Command, RunContext};
pub use scenario::Scenario;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure [scenario {hash}]: {source}")]
    Numerical {
        #[source]
        source: qline::Error,
        hash: String,
    },

    #[error("check failed: {0}")]
    Check(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<qline::Error> for CliError {
    fn from(e: qline::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical { source: e, hash: String::new() }
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numerical { .. } => EXIT_NUMERICAL,
            CliError::Check(_) => EXIT_CHECK,
        }
    }

    pub fn with_hash(self, h: &str) -> Self {
        match self {
            CliError::Numerical { source, .. } => CliError::Numerical { source, hash: h.to_string() },
            other => other,
        }
    }
}
