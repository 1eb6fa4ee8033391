//! Selective data acquisition across data slices.
//!
//! Given a dataset split into slices, the engine fits a power-law learning
//! curve per slice, solves a convex program that trades predicted loss
//! against an unfairness penalty under a cost budget, and acquires data
//! iteratively while capping how far the imbalance ratio may move in one
//! step.
//!
//! Module map:
//! * [`model`]: slice types, log loss, equalized-error-rate unfairness, cost normalization.
//! * [`curves`]: subset schedules, weighted power-law fitting, amortized curve estimation.
//! * [`optimizer`]: the allocation objective, its continuous solver and integer rounding.
//! * [`acquisition`]: imbalance-ratio limiting, the iterative loop, One-shot and the baselines.
//! * [`oracle`]: loss oracles (seeded synthetic world, external trainer over stdio).
//! * [`harness`]: config-driven experiments and CSV reports.

pub mod acquisition;
pub mod curves;
pub mod error;
pub mod harness;
pub mod model;
pub mod optimizer;
pub mod oracle;
pub mod seed;

pub use acquisition::{
    get_change_ratio, get_imbalance_ratio, increase_limit, run_iterative, run_one_shot, uniform_allocate,
    water_filling_allocate, AcquisitionLog, ChangeRatio, IterationRecord, IterativeConfig, LimitStrategy,
};
pub use curves::{
    estimate_curves, fit_power_law, read_points_csv, subset_schedule, CurveEstimationConfig, CurveFit, CurvePoint,
    EstimationMode, PowerLawCurve, SliceCurve,
};
pub use error::{Error, OracleError, Result};
pub use model::{log_loss, normalize_costs, unfairness, Budget, LossReport, SlicePartition, SliceState};
pub use optimizer::{objective, one_shot_allocate, solve_continuous, AllocationPlan, AllocationProblem};
pub use oracle::{EvalQuery, LossOracle, OracleCapabilities, QuerySizes};
