//! Command-line front end for `pfl-core`: configuration files, artifact
//! formats, run manifests and the `pfl` subcommands.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Command, Invocation, Outcome};
pub use error::{CliError, CliResult};
