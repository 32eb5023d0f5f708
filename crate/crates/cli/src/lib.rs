//! Experiment runner: configuration handling and the subcommand pipelines.

pub mod commands;
pub mod config;

pub use commands::run;
pub use config::{load_config, write_echo, ExperimentConfig, Mode};
