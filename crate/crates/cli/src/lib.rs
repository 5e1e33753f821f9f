//! Configuration, scenario registry and experiment orchestration for the
//! level-set energy laboratory.

pub mod config;
pub mod experiment;
pub mod output;
pub mod scenarios;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, run_sweep, ExperimentError, Outcome, SweepOutcome};
