//! Batch front end for `lrfit_core`: a TOML run configuration, staged
//! subcommands and the report, table and model files they write.

pub mod commands;
pub mod config;
pub mod model;
pub mod report;

pub use commands::{cmd_diagnose, cmd_filter, cmd_fit, cmd_predict, cmd_run, cmd_synth};
pub use config::{Overrides, RunConfig};
pub use model::ModelFile;

/// Collapse an error message onto one line for the error stream.
pub fn one_line(message: &str) -> String {
    message.split_whitespace().collect::<Vec<_>>().join(" ")
}
