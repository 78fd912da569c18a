//! Config parsing, command dispatch and file output for `brillouin-cool`.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, CliError, Command, Outcome};
pub use config::{load, parse, ConfigError, RunConfig};
