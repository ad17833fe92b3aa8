//! Configuration-driven experiments on top of `plap-core`.
//!
//! Each invocation runs one experiment and writes its artifacts (mesh text,
//! field CSV, profile CSV, SVG plot, JSON reports) into the output directory.
//! Every JSON report carries the sha256 hash of the effective configuration.

pub mod config;
pub mod error;
pub mod plot;
pub mod run;

pub use config::{ExperimentConfig, Kind};
pub use error::CliError;
