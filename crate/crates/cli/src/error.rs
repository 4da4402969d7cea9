//! Errors of the experiment runner and their exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// `line` is 0 for errors that concern the configuration as a whole.
    #[error("config error (line {line}): {message}")]
    Config { line: usize, message: String },
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("solver failure: {0}")]
    Solver(#[from] quasivem::Error),
    #[error("self-check failed: {0}")]
    Check(String),
}

impl CliError {
    /// 2 for configuration and output errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Output(_) => 2,
            Self::Solver(_) | Self::Check(_) => 3,
        }
    }
}
