use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ratio::{get_change_ratio, get_imbalance_ratio, increase_limit};
use crate::curves::{estimate_curves, CurveEstimationConfig, PowerLawCurve};
use crate::error::{Error, Result};
use crate::model::SlicePartition;
use crate::optimizer::{one_shot_allocate, AllocationPlan, AllocationProblem};
use crate::oracle::{EvalQuery, LossOracle};
use crate::seed;

const REALIZED_LOSS_TAG: u64 = 0x5245_414c;

/// How the imbalance-change limit grows between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitStrategy {
    /// Keep the limit fixed.
    Conservative,
    /// Add a constant each iteration.
    Moderate(f64),
    /// Multiply by a constant greater than 1 each iteration.
    Aggressive(f64),
}

impl LimitStrategy {
    pub fn moderate() -> Self {
        LimitStrategy::Moderate(1.0)
    }

    pub fn aggressive() -> Self {
        LimitStrategy::Aggressive(2.0)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LimitStrategy::Conservative => Ok(()),
            LimitStrategy::Moderate(c) if c.is_finite() && c > 0.0 => Ok(()),
            LimitStrategy::Aggressive(c) if c.is_finite() && c > 1.0 => Ok(()),
            other => Err(Error::invalid(format!("invalid limit strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeConfig {
    /// Slices below this size are topped up before the first iteration.
    pub min_slice_size: u64,
    pub initial_limit: f64,
    pub strategy: LimitStrategy,
    pub lambda: f64,
    pub max_iterations: usize,
}

impl Default for IterativeConfig {
    fn default() -> Self {
        Self {
            min_slice_size: 20,
            initial_limit: 1.0,
            strategy: LimitStrategy::moderate(),
            lambda: 1.0,
            max_iterations: 50,
        }
    }
}

impl IterativeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_slice_size < 1 {
            return Err(Error::invalid("min_slice_size must be at least 1"));
        }
        if !(self.initial_limit.is_finite() && self.initial_limit > 0.0) {
            return Err(Error::invalid("initial_limit must be positive"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("lambda must be nonnegative"));
        }
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        self.strategy.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    /// Less than one example's cost is left.
    BudgetExhausted,
    MaxIterations,
    /// An iteration could not acquire anything.
    Stalled,
    /// The budget could not lift every slice to the minimum size.
    InsufficientBudgetForMinimum,
    /// The oracle failed; the log holds everything up to the failure.
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub curves: Vec<PowerLawCurve>,
    pub reliable: Vec<bool>,
    pub residual_to_signal: Vec<f64>,
    pub sizes_before: Vec<u64>,
    /// Unlimited One-shot plan for the remaining budget.
    pub plan: AllocationPlan,
    /// Scaling applied to the plan when the imbalance limit was hit.
    pub change_ratio: Option<f64>,
    pub acquired: Vec<u64>,
    pub imbalance_ratio_before: f64,
    pub imbalance_ratio_after: f64,
    pub limit_t: f64,
    pub budget_remaining: f64,
    pub realized_per_slice_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionLog {
    pub slice_ids: Vec<String>,
    pub initial_sizes: Vec<u64>,
    pub initial_budget: f64,
    /// Examples bought to reach the minimum slice size.
    pub top_up: Vec<u64>,
    pub budget_after_top_up: f64,
    pub iterations: Vec<IterationRecord>,
    pub total_acquired: Vec<u64>,
    pub final_sizes: Vec<u64>,
    pub budget_remaining: f64,
    pub pool_limited: bool,
    pub stop_reason: StopReason,
}

impl AcquisitionLog {
    pub fn spent(&self) -> f64 {
        self.initial_budget - self.budget_remaining
    }

    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }
}

/// Imbalance-limited iterative acquisition.
///
/// Tops up slices below the minimum size, then repeatedly re-estimates the
/// curves, solves One-shot for the whole remaining budget, scales the plan
/// down if it would move the imbalance ratio by more than the current limit,
/// acquires, and grows the limit. Stops when no example is affordable, after
/// `max_iterations`, or when an iteration acquires nothing.
pub fn run_iterative<O: LossOracle + ?Sized>(
    partition: &SlicePartition,
    oracle: &mut O,
    curve_config: &CurveEstimationConfig,
    config: &IterativeConfig,
    budget: f64,
) -> Result<AcquisitionLog> {
    config.validate()?;
    run_loop(
        partition,
        oracle,
        curve_config,
        config.lambda,
        config.min_slice_size,
        budget,
        Some((config.initial_limit, config.strategy)),
        config.max_iterations,
    )
}

/// Estimates curves once and spends the entire budget on the optimizer's plan.
pub fn run_one_shot<O: LossOracle + ?Sized>(
    partition: &SlicePartition,
    oracle: &mut O,
    curve_config: &CurveEstimationConfig,
    lambda: f64,
    min_slice_size: u64,
    budget: f64,
) -> Result<AcquisitionLog> {
    run_loop(partition, oracle, curve_config, lambda, min_slice_size, budget, None, 1)
}

fn spend(counts: &[u64], costs: &[f64]) -> f64 {
    counts.iter().zip(costs).map(|(&x, c)| x as f64 * c).sum()
}

fn add(sizes: &[u64], counts: &[u64]) -> Vec<u64> {
    sizes.iter().zip(counts).map(|(s, d)| s + d).collect()
}

/// Whole-example version of `ratio * plan` that still respects the limit.
fn limited_counts(sizes: &[u64], plan: &[u64], ratio: f64, start: f64, limit: f64) -> Result<Vec<u64>> {
    let mut x = ratio;
    loop {
        let d: Vec<u64> = plan.iter().map(|&p| (p as f64 * x + 1e-9).floor() as u64).collect();
        let after = get_imbalance_ratio(&add(sizes, &d))?;
        if (after - start).abs() <= limit + 1e-9 || x == 0.0 {
            return Ok(d);
        }
        x = if x < 1e-9 { 0.0 } else { x * 0.999 };
    }
}

#[allow(clippy::too_many_arguments)]
fn run_loop<O: LossOracle + ?Sized>(
    partition: &SlicePartition,
    oracle: &mut O,
    curve_config: &CurveEstimationConfig,
    lambda: f64,
    min_slice_size: u64,
    budget: f64,
    limit: Option<(f64, LimitStrategy)>,
    max_iterations: usize,
) -> Result<AcquisitionLog> {
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(Error::invalid(format!("budget must be nonnegative, got {budget}")));
    }
    curve_config.validate()?;
    let n = partition.len();
    let costs = partition.costs();
    let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sizes = partition.sizes();
    let mut log = AcquisitionLog {
        slice_ids: partition.ids(),
        initial_sizes: sizes.clone(),
        initial_budget: budget,
        top_up: vec![0; n],
        budget_after_top_up: budget,
        iterations: Vec::new(),
        total_acquired: vec![0; n],
        final_sizes: sizes.clone(),
        budget_remaining: budget,
        pool_limited: false,
        stop_reason: StopReason::BudgetExhausted,
    };
    let mut remaining = budget;

    let deficits: Vec<u64> = sizes.iter().map(|&s| min_slice_size.saturating_sub(s)).collect();
    if deficits.iter().any(|&d| d > 0) {
        let cost = spend(&deficits, &costs);
        let insufficient = cost > remaining + 1e-9;
        let counts: Vec<u64> = if insufficient {
            let scale = remaining / cost;
            deficits.iter().map(|&d| (d as f64 * scale).floor() as u64).collect()
        } else {
            deficits
        };
        let ack = match oracle.acquire(&counts) {
            Ok(ack) => ack,
            Err(e) => {
                log.stop_reason = StopReason::Aborted(e.to_string());
                return Ok(log);
            }
        };
        log.pool_limited |= ack.pool_limited;
        sizes = add(&sizes, &ack.realized);
        remaining = (remaining - spend(&ack.realized, &costs)).max(0.0);
        log.top_up = ack.realized.clone();
        log.budget_after_top_up = remaining;
        log.total_acquired = ack.realized;
        log.final_sizes = sizes.clone();
        log.budget_remaining = remaining;
        if insufficient {
            log::warn!("budget {budget} cannot lift every slice to {min_slice_size}; stopping after top-up");
            log.stop_reason = StopReason::InsufficientBudgetForMinimum;
            return Ok(log);
        }
    }

    let mut ir = get_imbalance_ratio(&sizes)?;
    let mut limit_t = limit.map_or(f64::INFINITY, |(t0, _)| t0);
    loop {
        if remaining < min_cost - 1e-9 {
            log.stop_reason = StopReason::BudgetExhausted;
            break;
        }
        let index = log.iterations.len();
        if index >= max_iterations {
            log.stop_reason = StopReason::MaxIterations;
            break;
        }
        let cfg = CurveEstimationConfig { seed: seed::mix(curve_config.seed, index as u64), ..curve_config.clone() };
        let current = partition.with_sizes(&sizes)?;
        let curves = match estimate_curves(oracle, &current, &cfg) {
            Ok(c) => c,
            Err(Error::Oracle(e)) => {
                log.stop_reason = StopReason::Aborted(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let problem = AllocationProblem::new(
            curves.iter().map(|c| c.curve).collect(),
            sizes.clone(),
            costs.clone(),
            remaining,
            lambda,
        )?;
        let plan = one_shot_allocate(&problem)?;
        let mut counts = plan.d.clone();
        let mut change_ratio = None;
        let planned_ir = get_imbalance_ratio(&add(&sizes, &counts))?;
        if (planned_ir - ir).abs() > limit_t {
            let target = (ir + limit_t * (planned_ir - ir).signum()).max(1.0);
            let as_real: Vec<f64> = counts.iter().map(|&d| d as f64).collect();
            let cr = get_change_ratio(&sizes, &as_real, target)?;
            counts = limited_counts(&sizes, &plan.d, cr.ratio, ir, limit_t)?;
            change_ratio = Some(cr.ratio);
        }
        if counts.iter().all(|&d| d == 0) {
            log.stop_reason = StopReason::Stalled;
            break;
        }
        let ack = match oracle.acquire(&counts) {
            Ok(ack) => ack,
            Err(e) => {
                log.stop_reason = StopReason::Aborted(e.to_string());
                break;
            }
        };
        log.pool_limited |= ack.pool_limited;
        let sizes_before = sizes.clone();
        sizes = add(&sizes, &ack.realized);
        remaining = (remaining - spend(&ack.realized, &costs)).max(0.0);
        for (t, r) in log.total_acquired.iter_mut().zip(&ack.realized) {
            *t += r;
        }
        let realized_loss = match oracle.evaluate(&EvalQuery::full(n, seed::mix(cfg.seed, REALIZED_LOSS_TAG))) {
            Ok(l) => l,
            Err(e) => {
                log.stop_reason = StopReason::Aborted(e.to_string());
                log.final_sizes = sizes;
                log.budget_remaining = remaining;
                return Ok(log);
            }
        };
        let after = get_imbalance_ratio(&sizes)?;
        log.iterations.push(IterationRecord {
            index,
            reliable: curves.iter().map(|c| c.reliable).collect(),
            residual_to_signal: curves.iter().map(|c| c.residual_to_signal).collect(),
            curves: curves.into_iter().map(|c| c.curve).collect(),
            sizes_before,
            plan,
            change_ratio,
            acquired: ack.realized.clone(),
            imbalance_ratio_before: ir,
            imbalance_ratio_after: after,
            limit_t,
            budget_remaining: remaining,
            realized_per_slice_loss: realized_loss,
        });
        log::debug!("iteration {index}: acquired {:?}, IR {ir:.3} -> {after:.3}, T {limit_t}", ack.realized);
        if let Some((_, strategy)) = limit {
            limit_t = increase_limit(limit_t, strategy);
        }
        ir = after;
        if ack.realized.iter().all(|&r| r == 0) {
            log.stop_reason = StopReason::Stalled;
            break;
        }
    }
    log.final_sizes = sizes;
    log.budget_remaining = remaining;
    Ok(log)
}

/// Writes one row per (iteration, slice); the top-up, if any, is iteration 0
/// and loop iterations are numbered from 1.
pub fn write_log_csv(path: &Path, log: &AcquisitionLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record([
        "iteration",
        "slice_id",
        "size_before",
        "acquired",
        "limit_T",
        "ir_before",
        "ir_after",
        "budget_remaining",
        "realized_loss",
    ])
    .map_err(|e| Error::csv(path, e))?;
    if log.top_up.iter().any(|&d| d > 0) {
        let after = add(&log.initial_sizes, &log.top_up);
        let ir_before = get_imbalance_ratio(&log.initial_sizes).map_or(String::new(), |v| v.to_string());
        let ir_after = get_imbalance_ratio(&after).map_or(String::new(), |v| v.to_string());
        let remaining = log.budget_after_top_up.to_string();
        for (i, id) in log.slice_ids.iter().enumerate() {
            w.write_record([
                "0".to_string(),
                id.clone(),
                log.initial_sizes[i].to_string(),
                log.top_up[i].to_string(),
                String::new(),
                ir_before.clone(),
                ir_after.clone(),
                remaining.clone(),
                String::new(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    for it in &log.iterations {
        for (i, id) in log.slice_ids.iter().enumerate() {
            w.write_record([
                (it.index + 1).to_string(),
                id.clone(),
                it.sizes_before[i].to_string(),
                it.acquired[i].to_string(),
                it.limit_t.to_string(),
                it.imbalance_ratio_before.to_string(),
                it.imbalance_ratio_after.to_string(),
                it.budget_remaining.to_string(),
                it.realized_per_slice_loss[i].to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
