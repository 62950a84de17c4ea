//! Experiment runner behind the `ifdelay` command.

pub mod check;
pub mod config;
pub mod dataset;
pub mod experiments;

pub use check::{check_reproduction, CheckEntry, CheckError, Report};
pub use config::{ConfigError, ExperimentConfig, Kind};
pub use dataset::{Dataset, DatasetError};
pub use experiments::{run_experiment, ExperimentError};
