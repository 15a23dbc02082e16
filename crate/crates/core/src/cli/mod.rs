//! Command-line front end: configuration, batch execution, reports.

pub mod commands;
pub mod config;
pub mod csv;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
pub use commands::{run, CommandOutput};
pub use config::{parse_config, ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

/// Exit status for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } | Error::Numerical(_) => EXIT_DIVERGENCE,
        Error::Infeasible(_) => EXIT_FAILURE,
        Error::Argument(_) | Error::Domain(_) => EXIT_CONFIG,
    }
}

#[derive(Debug, Parser)]
#[command(name = "hpid", version, about = "Homogeneous PID simulation, certification and comparison")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (overrides `out` in the configuration).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for batch runs.
    #[arg(long, global = true, env = "HPID_WORKERS")]
    pub workers: Option<usize>,

    /// Seed for randomized disturbance phases and property sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Replace the experimental norm by a non-homogeneous one (verify only).
    #[arg(long, global = true, hide = true)]
    pub inject_broken_norm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate every scenario and write one trajectory CSV each.
    Simulate,
    /// Compare PID/hPID pairs and write index tables.
    Compare,
    /// Certify the gains of every scenario.
    Certify,
    /// Run the property suite.
    Verify,
}
