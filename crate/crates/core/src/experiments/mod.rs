//! Configuration, trial orchestration and result files.

pub mod config;
pub mod output;
pub mod runner;
pub mod seed;

pub use config::{parse_config, CrashEntry, CrashSpec, ExperimentConfig, InputDist, TimeoutSetting};
pub use output::{format_g9, write_curves, write_results, write_summary, CURVES_HEADER, SUMMARY_HEADER};
pub use runner::{
    prepare_trial, resolve_crashes, run_experiment, run_prepared, run_trial, summarize, trial_topology,
    ExperimentResult, SummaryRow, TrialResult, TrialSetup,
};
pub use seed::{derive_seed, splitmix64, sub_seed, Stream};
