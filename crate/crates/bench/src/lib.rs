//! Benchmark harness for knowledge-gradient Bayesian optimization: runs a
//! grid of acquisition methods over seeded synthetic objectives and writes
//! per-iteration results, per-cell summaries and run metadata.

pub mod config;
pub mod demo;
pub mod experiment;
pub mod records;
pub mod summary;

pub use config::{ExperimentConfig, TimingMode};
pub use demo::{demo_emit, demo_fixture};
pub use experiment::{run_experiment, write_outputs, ExperimentOutput};
pub use records::{read_results, write_results, ResultRow};
pub use summary::{summarize, write_summary, SummaryRow};
