//! Command-line pipeline: generate training data, value it with Action
//! Shapley, select training sets and validate the resulting agents.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

pub use commands::Context;
pub use config::RunConfig;
pub use error::{CliError, CliResult};
