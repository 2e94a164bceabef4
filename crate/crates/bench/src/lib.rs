//! Experiment harness for Nyström landmark selection: error-against-rank
//! curves, embedding dumps and exhaustive bound checks, all seeded and
//! written as CSV with JSON metadata.

pub mod bounds;
pub mod config;
pub mod curve;
pub mod dataset;
pub mod embed;
pub mod error;
pub mod output;

pub use config::{BoundsConfig, ExperimentConfig, MethodSpec, Overrides};
pub use error::{BenchError, Result};
