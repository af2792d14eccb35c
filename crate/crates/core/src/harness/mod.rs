//! Experiment runner: configuration, batched episodes, statistics and files.

pub mod config;
pub mod experiment;
pub mod summary;

pub use config::{CostKind, ExperimentConfig};
pub use experiment::{run_experiment, run_sweep, simulate, write_outputs, ExperimentRun};
pub use summary::{arrive_stats, summarize, ArriveStats, ExperimentSummary, SchemeSummary};
