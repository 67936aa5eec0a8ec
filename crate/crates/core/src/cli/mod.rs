//! Configuration-driven experiment runner behind the command-line tool.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ConfigError, Mode, Radii, RunConfig, Tolerances};
pub use run::{noise_floor, run, summarize, ExitKind, RunError, RunReport, SlopeFit, SweepSummary};
