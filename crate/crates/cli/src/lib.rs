//! Batch front end for the `midas-me` library: configuration files, grid
//! runs, diagnostics and fitting from CSV.

pub mod app;
pub mod config;
pub mod ingest;
pub mod output;

pub use app::{run, CliError};
pub use config::{load_config, parse_config, Mode, RunConfig};
