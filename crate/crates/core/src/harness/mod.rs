//! Experiment orchestration: configuration, training runners, statistics,
//! persistence, and result export.

pub mod config;
pub mod export;
pub mod metrics;
pub mod persist;
pub mod runner;
pub mod stats;

pub use config::{AlgorithmKind, ExperimentConfig};
pub use export::{
    export_directory, write_comparison, write_curve_csv, write_results_csv, write_run_json,
    write_summary_json, write_sweep, write_train_outputs, ExportFormat,
};
pub use metrics::{domain_optimum, RunResult};
pub use persist::{load_policies, save_policies, PolicyFile, POLICY_FORMAT_VERSION};
pub use runner::{
    compare, evaluate_policies, policy_file_for, resolve_veg_tau, seed_list, sweep, train_run,
    transfer_run, AlgorithmSummary, CellFailure, ComparisonReport, PairwiseTest, SweepPoint,
    SweepReport, TrainOutput,
};
pub use stats::{summarize, welch_t_test, significantly_greater, Summary};
