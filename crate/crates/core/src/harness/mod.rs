//! Experiment driver: configuration, per-seed runs, baselines, and sweeps.
//!
//! This is the reproducibility surface behind the `uulearn` CLI: every run
//! is determined by (config file, seed), results serialize to JSON with a
//! stable layout, and sweeps reuse one seed list across all grid points.

mod config;
mod runner;
mod sweeps;

pub use config::*;
pub use runner::*;
pub use sweeps::*;
