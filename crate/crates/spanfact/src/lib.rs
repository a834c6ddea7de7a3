//! File formats, configuration and the `spanfact` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;

pub use cli::run;
pub use error::{CliError, CliResult};
