//! Acquisition strategies: the imbalance-limited iterative loop, One-shot,
//! and the Uniform / Water filling baselines.

mod baselines;
mod iterative;
mod ratio;

pub use baselines::{uniform_allocate, water_filling_allocate};
pub use iterative::{
    run_iterative, run_one_shot, write_log_csv, AcquisitionLog, IterationRecord, IterativeConfig, LimitStrategy,
    StopReason,
};
pub use ratio::{get_change_ratio, get_imbalance_ratio, imbalance_ratio, increase_limit, ChangeRatio};
