//! Experiment harness and command-line front end: config-driven
//! multi-trial runs, aggregation against the error bound, and CSV/JSON
//! output.

pub mod cli;
pub mod config;
pub mod output;
pub mod run;

pub use config::{Beta0Mode, ExperimentConfig, PolicySpec};
pub use output::{emit_schedule_table, figure3_tables, write_experiment, OutputFormat};
pub use run::{
    run_experiment, run_experiment_with_workers, run_trace, AggregateCurve, ExperimentResult,
};
