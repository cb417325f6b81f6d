//! Command implementations behind the `altruist` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod preview;
pub mod windows;

pub use commands::{cmd_compare, cmd_estimate, cmd_metrics, cmd_simulate};
pub use config::RunConfig;
pub use error::CliError;
pub use manifest::Manifest;
