//! Experiment harness: configs, agents, experiments and reports.

pub mod agents;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod stats;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiments::{Experiment, ExperimentRegistry};
pub use report::ExperimentReport;
