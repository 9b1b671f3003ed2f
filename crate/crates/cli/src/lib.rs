//! Experiment runner for `geninv-core`: JSON configs in, deterministic JSON
//! and CSV reports out.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{parse_config, parse_config_file, ConfigError, ExperimentConfig};
pub use experiments::{run_experiment, LabError, EXPERIMENTS};
pub use report::{Check, Report};
