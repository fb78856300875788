//! Experiment harness for the grid-based LDP range-query estimators:
//! configuration, deterministic runners and result files.

pub mod config;
pub mod error;
pub mod harness;
pub mod results;

pub use config::{ExperimentConfig, Method};
pub use error::{BenchError, Result};
pub use harness::{derive_seed, with_workers, Harness, RunOutput};
pub use results::{emit_results, read_results, summarize, ResultRow};
