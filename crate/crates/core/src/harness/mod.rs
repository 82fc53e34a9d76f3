//! Paired-seed experiments: shared burn-in, per-method test epochs, summary
//! files and reports.

pub mod config;
pub mod experiment;
pub mod report;
pub mod trial;

pub use config::{ExperimentConfig, Method, Profile};
pub use experiment::{run_experiment, run_trial_methods, ExperimentSummary, RunOptions, TrialRun};
pub use report::{build_report, report, Grouping, Report, REFERENCE_VALUES};
pub use trial::{
    prepare_method, run_burn_in, run_test_epochs, run_trial, BurnIn, EpochSeries, PreparedMethod, StepPoint,
    TrialManifest, TrialResult,
};
