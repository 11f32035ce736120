//! Experiment driver: configuration, runners, CDFs, result files and CLI.

pub mod cdf;
pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;

pub use cdf::{CdfSeries, SeriesLabel};
pub use cli::cli_main;
pub use config::{ExperimentConfig, ExperimentKind, LinkModel, SystemConfig, VirtualLimit};
pub use experiments::{
    error_pct, run, run_convergence, run_error_cdf, run_lambda_table, run_shadow_sweep,
    run_sinr_cdf, CdfMode, ConvergenceRecord, ExperimentOutput, LambdaRecord,
};
