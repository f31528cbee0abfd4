//! Experiment driver: configuration, seeded runs of the verifiers, and
//! deterministic reports.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ConfigError, ExperimentConfig, Kind, Resolved};
pub use experiments::{run, RunError};
pub use report::{Check, Curve, Report, Table};
