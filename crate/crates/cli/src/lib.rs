//! Experiment runner behind the `quasivem` binary: configuration files,
//! custom model files, output writing and self-checks.

pub mod check;
pub mod config;
pub mod error;
pub mod model_file;
pub mod run;

pub use config::{ExperimentConfig, GridKind, ProblemSource};
pub use error::CliError;
