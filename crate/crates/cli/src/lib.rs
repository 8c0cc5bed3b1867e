//! Command-line front end of the MHD solver: configuration, command
//! dispatch and VTK output.

pub mod commands;
pub mod config;
pub mod vtk;

pub use commands::{exit_code, run_command, CliError, Report};
pub use config::{Command, ConfigError, Overrides, RunConfig};
