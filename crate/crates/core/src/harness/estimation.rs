//! Amortized versus exhaustive curve estimation on the same trials.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, OracleSection};
use super::experiment::trial_seed;
use super::report::mean_se;
use crate::acquisition::run_iterative;
use crate::curves::{estimate_curves, EstimationMode};
use crate::error::{Error, Result};
use crate::model::LossReport;
use crate::oracle::{CountingOracle, EvalQuery, LossOracle, SyntheticOracle};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub mode: EstimationMode,
    /// Oracle queries for one curve estimate of all slices.
    pub queries_per_estimate: usize,
    /// Oracle queries over every trial, realized-loss checks included.
    pub total_queries: usize,
    pub wall_secs: f64,
    pub loss_mean: f64,
    pub loss_se: f64,
    pub avg_eer_mean: f64,
    pub avg_eer_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationComparison {
    pub amortized: ModeResult,
    pub exhaustive: ModeResult,
}

/// Runs the Moderate strategy with both estimation modes on identical
/// synthetic worlds and seeds. Needs a synthetic oracle.
pub fn compare_estimation_modes(cfg: &ExperimentConfig) -> Result<EstimationComparison> {
    cfg.validate()?;
    if !matches!(cfg.oracle, OracleSection::Synthetic(_)) {
        return Err(Error::Config("estimation-mode comparison needs a synthetic oracle".into()));
    }
    let run = |mode: EstimationMode| -> Result<ModeResult> {
        let partition = cfg.partition()?;
        let start = Instant::now();
        let mut total_queries = 0;
        let mut queries_per_estimate = 0;
        let mut losses = Vec::new();
        let mut eers = Vec::new();
        for t in 0..cfg.num_trials {
            let seed = trial_seed(cfg.seed, t);
            let curves = crate::curves::CurveEstimationConfig { mode, ..cfg.curve_config(seed::mix(seed, 1)) };
            if t == 0 {
                let mut probe = CountingOracle::new(SyntheticOracle::new(cfg.synthetic_world(seed)?));
                estimate_curves(&mut probe, &partition, &curves)?;
                queries_per_estimate = probe.evaluations();
            }
            let mut oracle = CountingOracle::new(SyntheticOracle::new(cfg.synthetic_world(seed)?));
            let strategy = cfg.strategy(Method::Moderate).expect("moderate");
            run_iterative(&partition, &mut oracle, &curves, &cfg.iterative_config(strategy), cfg.budget)?;
            total_queries += oracle.evaluations();
            let final_loss = oracle.evaluate(&EvalQuery::full(partition.len(), seed::mix(seed, 2)))?;
            let report = LossReport::from_slice_losses(final_loss, &partition.validation_sizes())?;
            losses.push(report.overall_loss);
            eers.push(report.avg_eer);
        }
        let (loss_mean, loss_se) = mean_se(&losses);
        let (avg_eer_mean, avg_eer_se) = mean_se(&eers);
        Ok(ModeResult {
            mode,
            queries_per_estimate,
            total_queries,
            wall_secs: start.elapsed().as_secs_f64(),
            loss_mean,
            loss_se,
            avg_eer_mean,
            avg_eer_se,
        })
    };
    Ok(EstimationComparison {
        amortized: run(EstimationMode::Amortized)?,
        exhaustive: run(EstimationMode::Exhaustive)?,
    })
}
