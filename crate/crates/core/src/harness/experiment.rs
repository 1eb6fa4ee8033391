//! Runs every configured method over repeated trials.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Method, OracleSection};
use super::report::ComparisonReport;
use crate::acquisition::{run_iterative, run_one_shot, uniform_allocate, water_filling_allocate, StopReason};
use crate::error::{Error, OracleError, Result};
use crate::model::{LossReport, SlicePartition};
use crate::oracle::{Acquisition, EvalQuery, LossOracle, OracleCapabilities, SyntheticOracle, TrainerOracle};
use crate::seed;

const CURVES_TAG: u64 = 0x4355_5256;
const FINAL_TAG: u64 = 0x4649_4e41;

/// Outcome of one method in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub budget: f64,
    pub trial: usize,
    pub seed: u64,
    pub world_digest: String,
    /// `None` when the method failed; `error` then says why.
    pub report: Option<LossReport>,
    pub error: Option<String>,
    pub acquired: Vec<u64>,
    pub spent: f64,
    pub iterations: usize,
    pub stop_reason: String,
    /// Curves flagged unreliable in the first estimate.
    pub unreliable_curves: usize,
    pub elapsed_secs: f64,
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    seed::mix(master, trial as u64)
}

pub(crate) enum TrialOracle {
    Synthetic(SyntheticOracle),
    Trainer(TrainerOracle),
}

impl TrialOracle {
    pub(crate) fn open(cfg: &ExperimentConfig, trial_seed: u64) -> Result<(Self, String)> {
        match &cfg.oracle {
            OracleSection::Synthetic(_) => {
                let world = cfg.synthetic_world(trial_seed)?;
                let digest = world.digest();
                Ok((TrialOracle::Synthetic(SyntheticOracle::new(world)), digest))
            }
            OracleSection::Trainer(endpoint) => {
                let mut endpoint = endpoint.clone();
                for arg in &mut endpoint.command {
                    *arg = arg.replace("{seed}", &trial_seed.to_string());
                }
                let mut h = Sha256::new();
                h.update(endpoint.command.join("\u{1f}").as_bytes());
                let digest: String = h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect();
                let ids = cfg.slices.iter().map(|s| s.id.clone()).collect();
                Ok((TrialOracle::Trainer(TrainerOracle::connect(&endpoint, ids)?), digest))
            }
        }
    }
}

impl LossOracle for TrialOracle {
    fn num_slices(&self) -> usize {
        match self {
            TrialOracle::Synthetic(o) => o.num_slices(),
            TrialOracle::Trainer(o) => o.num_slices(),
        }
    }

    fn capabilities(&self) -> OracleCapabilities {
        match self {
            TrialOracle::Synthetic(o) => o.capabilities(),
            TrialOracle::Trainer(o) => o.capabilities(),
        }
    }

    fn evaluate(&mut self, query: &EvalQuery) -> Result<Vec<f64>, OracleError> {
        match self {
            TrialOracle::Synthetic(o) => o.evaluate(query),
            TrialOracle::Trainer(o) => o.evaluate(query),
        }
    }

    fn acquire(&mut self, counts: &[u64]) -> Result<Acquisition, OracleError> {
        match self {
            TrialOracle::Synthetic(o) => o.acquire(counts),
            TrialOracle::Trainer(o) => o.acquire(counts),
        }
    }
}

struct Outcome {
    acquired: Vec<u64>,
    spent: f64,
    iterations: usize,
    stop_reason: String,
    unreliable_curves: usize,
    aborted: Option<String>,
}

fn acquire_plan<O: LossOracle>(oracle: &mut O, partition: &SlicePartition, d: &[u64]) -> Result<Outcome> {
    let ack = oracle.acquire(d)?;
    let spent = ack.realized.iter().zip(partition.costs()).map(|(&x, c)| x as f64 * c).sum();
    Ok(Outcome {
        acquired: ack.realized,
        spent,
        iterations: 1,
        stop_reason: if ack.pool_limited { "pool_limited" } else { "done" }.into(),
        unreliable_curves: 0,
        aborted: None,
    })
}

fn run_method<O: LossOracle>(
    cfg: &ExperimentConfig,
    partition: &SlicePartition,
    oracle: &mut O,
    method: Method,
    budget: f64,
    seed: u64,
) -> Result<Outcome> {
    let curves = cfg.curve_config(seed::mix(seed, CURVES_TAG));
    let log = match method {
        Method::Original => {
            return Ok(Outcome {
                acquired: vec![0; partition.len()],
                spent: 0.0,
                iterations: 0,
                stop_reason: "done".into(),
                unreliable_curves: 0,
                aborted: None,
            })
        }
        Method::Uniform => return acquire_plan(oracle, partition, &uniform_allocate(partition, budget)?.d),
        Method::WaterFilling => return acquire_plan(oracle, partition, &water_filling_allocate(partition, budget)?.d),
        Method::OneShot => run_one_shot(partition, oracle, &curves, cfg.lambda, cfg.iterative.min_slice_size, budget)?,
        Method::Conservative | Method::Moderate | Method::Aggressive => {
            let strategy = cfg.strategy(method).expect("iterative method");
            run_iterative(partition, oracle, &curves, &cfg.iterative_config(strategy), budget)?
        }
    };
    Ok(Outcome {
        aborted: match &log.stop_reason {
            StopReason::Aborted(msg) => Some(msg.clone()),
            _ => None,
        },
        spent: log.spent(),
        iterations: log.iteration_count(),
        stop_reason: format!("{:?}", log.stop_reason),
        unreliable_curves: log.iterations.first().map_or(0, |it| it.reliable.iter().filter(|r| !**r).count()),
        acquired: log.total_acquired,
    })
}

/// Runs one method for one trial against a fresh oracle. Failures are
/// captured in the record rather than returned.
pub fn run_trial_method(cfg: &ExperimentConfig, method: Method, budget: f64, trial: usize) -> TrialRecord {
    let seed = trial_seed(cfg.seed, trial);
    let start = Instant::now();
    let mut record = TrialRecord {
        method,
        budget,
        trial,
        seed,
        world_digest: String::new(),
        report: None,
        error: None,
        acquired: vec![0; cfg.slices.len()],
        spent: 0.0,
        iterations: 0,
        stop_reason: String::new(),
        unreliable_curves: 0,
        elapsed_secs: 0.0,
    };
    let result = (|| -> Result<()> {
        let partition = cfg.partition()?;
        let (mut oracle, digest) = TrialOracle::open(cfg, seed)?;
        record.world_digest = digest;
        let out = run_method(cfg, &partition, &mut oracle, method, budget, seed)?;
        if let Some(msg) = out.aborted {
            return Err(Error::Numerical(format!("acquisition aborted by oracle failure: {msg}")));
        }
        let losses = oracle.evaluate(&EvalQuery::full(partition.len(), seed::mix(seed, FINAL_TAG)))?;
        record.report = Some(LossReport::from_slice_losses(losses, &partition.validation_sizes())?);
        record.acquired = out.acquired;
        record.spent = out.spent;
        record.iterations = out.iterations;
        record.stop_reason = out.stop_reason;
        record.unreliable_curves = out.unreliable_curves;
        Ok(())
    })();
    if let Err(e) = result {
        log::warn!("{method} failed in trial {trial} at budget {budget}: {e}");
        record.report = None;
        record.error = Some(e.to_string());
        record.stop_reason = "failed".into();
    }
    record.elapsed_secs = start.elapsed().as_secs_f64();
    record
}

/// Runs all methods, budgets and trials, and writes the report when the
/// config names an output directory. Synthetic trials run in parallel;
/// trainer-backed trials run one at a time.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    if matches!(cfg.oracle, OracleSection::Trainer(_)) {
        // Fail fast on an unreachable trainer instead of failing every trial.
        drop(TrialOracle::open(cfg, trial_seed(cfg.seed, 0))?);
    }
    let mut jobs = Vec::new();
    for budget in cfg.budget_list() {
        for trial in 0..cfg.num_trials {
            for &method in &cfg.methods {
                jobs.push((method, budget, trial));
            }
        }
    }
    let trials: Vec<TrialRecord> = match cfg.oracle {
        OracleSection::Synthetic(_) => jobs.par_iter().map(|&(m, b, t)| run_trial_method(cfg, m, b, t)).collect(),
        OracleSection::Trainer(_) => jobs.iter().map(|&(m, b, t)| run_trial_method(cfg, m, b, t)).collect(),
    };
    let report = ComparisonReport::new(cfg.name.clone(), cfg.slices.iter().map(|s| s.id.clone()).collect(), trials);
    let failures = report.trials.iter().filter(|t| t.report.is_none()).count();
    if failures > 0 {
        log::warn!("{failures} method runs failed and are excluded from the summary");
    }
    if let Some(dir) = &cfg.output_dir {
        super::report::write_report(&report, dir)?;
    }
    Ok(report)
}
