//! Batch runner for the `heavy-atom` command: configuration, cached TF
//! solutions, sweeps and report emission.

pub mod cache;
pub mod check;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, RunReport};
pub use config::{Cli, Command, Format, Options, RunConfig, CACHE_ENV};
pub use error::{CliError, CliResult};
