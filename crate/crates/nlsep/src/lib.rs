//! Experiment harness, configuration files and reports on top of `nlsep-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod recipes;
pub mod report;

pub use nlsep_core as core;

pub use config::{parse_config, RunConfig};
pub use error::HarnessError;
pub use experiment::ExperimentSpec;
pub use harness::{run_experiment, RunContext};
pub use report::Report;
