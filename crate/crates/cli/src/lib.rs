//! Batch front-end for the mode-selective upconversion classifier:
//! configuration, scenario orchestration and result files.

pub mod commands;
pub mod config;
pub mod output;
pub mod scenario;

pub use commands::{run, Command, Outcome, RunRecord, Status};
pub use config::{ConfigError, ScenarioConfig};
