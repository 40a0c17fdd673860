//! Command-line front end: configuration, image I/O and the four commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod imageio;

pub use config::RunConfig;
pub use error::{CliError, Result};
