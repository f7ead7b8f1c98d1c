//! Scenario files and the commands behind the `nonrecip` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use config::ScenarioConfig;
pub use error::{CliError, CliResult};
