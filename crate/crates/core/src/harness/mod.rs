//! Experiment orchestration: configuration, the synchronous period loop,
//! Monte Carlo replication and CSV output.

mod config;
mod output;
mod run;

pub use config::{ExperimentConfig, ExperimentParams, Policy, ThroughputMode};
pub use output::{emit_csv, format_decimal, write_manifest, write_outputs, CSV_HEADER};
pub use run::{
    build_agents, replication_rngs, run_experiment, run_period, run_replication, Environment, ExperimentResult,
    PeriodAggregate, PeriodMetrics, PeriodRecord, ReplicationSummary, STEADY_STATE_FRACTION,
};
