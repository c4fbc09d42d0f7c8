//! Command-line front end for photonic-lab. Every command renders into an
//! [`Output`] so the binary and the tests share one code path.

pub mod commands;
pub mod config;
pub mod error;
pub mod file;
pub mod format;

pub use commands::{run, Cli, Command, Output};
pub use error::CliError;
