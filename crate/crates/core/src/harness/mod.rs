//! Experiment plumbing: configuration, data files, the multi-seed runner,
//! reports and the command-line interface.

pub mod cli;
pub mod config;
pub mod io;
pub mod report;
pub mod runner;
pub mod synthetic;

pub use config::{batch_size, AlgorithmSpec, ExperimentConfig, ProblemSpec};
pub use report::{emit_report, summarize, Summary};
pub use runner::{run_experiment, run_on, MetricRecord, RunResult, RunStatus, StepsizeFlag};
