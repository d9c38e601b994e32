//! Experiment runner for `qresponse-core`: JSON configuration, parallel
//! sweeps, deterministic CSV/JSON artifacts and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod io;
pub mod runner;
pub mod stats;

pub use config::{Experiment, ExperimentConfig};
pub use error::RunError;
pub use runner::Command;
