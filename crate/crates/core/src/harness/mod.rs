//! Config-driven experiments comparing acquisition methods.

mod config;
mod estimation;
mod experiment;
mod report;

pub use config::{
    CurvesSection, ExperimentConfig, IterativeSection, Method, OracleSection, SliceSpec, SyntheticSpec, SCHEMA_VERSION,
};
pub use estimation::{compare_estimation_modes, EstimationComparison, ModeResult};
pub use experiment::{run_experiment, run_trial_method, trial_seed, TrialRecord};
pub use report::{emit_plot_data, read_raw_csv, write_report, ComparisonReport, MethodSummary};
