//! Experiment harness: configs, runs, traces and manifests.

pub mod config;
pub mod emit;
pub mod experiment;
pub mod presets;

pub use config::{ConfigError, Experiment, ExperimentConfig, Format};
pub use experiment::{execute, run_experiment, ExperimentOutput, RunError, RunManifest};
