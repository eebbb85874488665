//! Experiment harness: configuration, runs with invariant monitors, regret
//! diagnostics, aggregation, output files, and the command-line interface.

pub mod check;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod output;
pub mod run;

pub use cli::cli_main;
pub use config::ExperimentConfig;
pub use diagnostics::{
    aggregate_curves, bound_rhs, fit_exponent, mean_std, penalty_diagnostic, pseudo_regret, AggregateCurve,
    BoundDiagnostic, PenaltyDiagnostic,
};
pub use run::{
    run_experiment, Algorithm, Monitors, RegimeKind, RunOutput, RunSummary, Scenario, Trace, TraceDetail,
    TraceRecord, ViolationCounts, SCHEMA_VERSION,
};
