//! Experiment configuration, Monte-Carlo runner, metrics and CSV output.

pub mod config;
pub mod diagnostics;
pub mod metrics;
pub mod output;
pub mod runner;

pub use config::{ExperimentConfig, MethodConfig, Mode};
pub use runner::{run_experiment, trial_rng, AggregateRow, ExperimentOutput, TrialRecord};
