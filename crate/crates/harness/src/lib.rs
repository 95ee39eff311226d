//! Configuration, orchestration and report emission for escape-lab runs.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ConfigError, ExperimentConfig, RawConfig};
pub use experiments::{fit_csv, run_experiment, FitKind, RunError};
pub use report::{emit_report, RunReport};
