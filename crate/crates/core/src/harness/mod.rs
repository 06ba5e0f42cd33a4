//! Batch experiment runner: configs, CSV traces, summaries and plot data.

pub mod config;
pub mod plot;
pub mod runner;
pub mod trace;

pub use config::{RunConfig, SweepAxis, SCHEMA_VERSION};
pub use runner::{check, exit_code, postprocess, run_config, RunOutcome, RunnerOptions};
