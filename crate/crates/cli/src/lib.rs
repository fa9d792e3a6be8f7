//! Configuration-driven experiment orchestration for the PINN sensitivity
//! trainer: training runs, oracle dumps, parameter sweeps, and the timing
//! study, all emitting reproducible CSV/JSON bundles.

pub mod config;
pub mod metrics;
pub mod oracle_cmd;
pub mod runner;
pub mod sweep;

pub use config::{ExperimentConfig, ProblemName};
pub use runner::{run, train, ResultBundle, TrainOutcome};
