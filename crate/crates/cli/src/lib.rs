//! `scenewatch` command line and the HTTP API behind the labeling UI.

pub mod commands;
mod error;
pub mod server;

pub use commands::{run, Cli, Command};
pub use error::CliError;
