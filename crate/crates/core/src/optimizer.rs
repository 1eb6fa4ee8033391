//! Budgeted allocation of new examples across slices.
//!
//! Minimizes `sum_i L_i(d_i) + lambda * sum_i max(0, L_i(d_i) / A - 1)` over
//! `d >= 0` with `sum_i C_i d_i = B`, where `L_i(d) = curve_i(|s_i| + d)` and
//! `A` is the mean predicted loss at the current sizes.

use serde::{Deserialize, Serialize};

use crate::curves::PowerLawCurve;
use crate::error::{Error, Result};

const STEP_INIT: f64 = 1.0;
const BACKTRACK: f64 = 0.5;
const ARMIJO: f64 = 1e-4;
const REL_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;
const MAX_EXCHANGES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    curves: Vec<PowerLawCurve>,
    sizes: Vec<u64>,
    costs: Vec<f64>,
    budget: f64,
    lambda: f64,
    baseline_loss: f64,
}

impl AllocationProblem {
    /// Validates the inputs and freezes the baseline loss `A`.
    pub fn new(curves: Vec<PowerLawCurve>, sizes: Vec<u64>, costs: Vec<f64>, budget: f64, lambda: f64) -> Result<Self> {
        let n = curves.len();
        if n == 0 || sizes.len() != n || costs.len() != n {
            return Err(Error::InvalidProblem(format!(
                "curves, sizes and costs must share a nonzero length (got {n}, {}, {})",
                sizes.len(),
                costs.len()
            )));
        }
        for c in &curves {
            c.validate().map_err(|e| Error::InvalidProblem(e.to_string()))?;
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidProblem("slice sizes must be positive".into()));
        }
        if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::InvalidProblem(format!("costs must be positive, got {c}")));
        }
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(Error::InvalidProblem(format!("budget must be nonnegative, got {budget}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidProblem(format!("lambda must be nonnegative, got {lambda}")));
        }
        let baseline_loss = curves.iter().zip(&sizes).map(|(c, &s)| c.predict(s as f64)).sum::<f64>() / n as f64;
        if !(baseline_loss.is_finite() && baseline_loss > 0.0) {
            return Err(Error::InvalidProblem(format!("baseline loss {baseline_loss} is not positive")));
        }
        Ok(Self { curves, sizes, costs, budget, lambda, baseline_loss })
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn curves(&self) -> &[PowerLawCurve] {
        &self.curves
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn baseline_loss(&self) -> f64 {
        self.baseline_loss
    }

    pub fn predicted_loss(&self, i: usize, d: f64) -> f64 {
        self.curves[i].predict(self.sizes[i] as f64 + d)
    }

    /// Contribution of slice `i` to the objective.
    fn term(&self, i: usize, d: f64) -> f64 {
        let loss = self.predicted_loss(i, d);
        loss + self.lambda * (loss / self.baseline_loss - 1.0).max(0.0)
    }

    /// Gradient of `term(i, .)`; the hinge contributes 0 at its kink.
    fn term_slope(&self, i: usize, d: f64) -> f64 {
        let x = self.sizes[i] as f64 + d;
        let slope = self.curves[i].slope(x);
        if self.curves[i].predict(x) > self.baseline_loss {
            slope * (1.0 + self.lambda / self.baseline_loss)
        } else {
            slope
        }
    }

    fn value(&self, d: &[f64]) -> f64 {
        d.iter().enumerate().map(|(i, &x)| self.term(i, x)).sum()
    }

    fn spend(&self, d: &[u64]) -> f64 {
        d.iter().zip(&self.costs).map(|(&x, c)| x as f64 * c).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    /// Examples to acquire per slice.
    pub d: Vec<u64>,
    pub spent: f64,
    pub objective: f64,
}

impl AllocationPlan {
    pub fn zeros(n: usize) -> Self {
        Self { d: vec![0; n], spent: 0.0, objective: 0.0 }
    }

    pub fn total(&self) -> u64 {
        self.d.iter().sum()
    }
}

/// Predicted loss plus the lambda-weighted hinge penalty.
pub fn objective(problem: &AllocationProblem, d: &[f64]) -> Result<f64> {
    if d.len() != problem.len() {
        return Err(Error::InvalidProblem(format!("allocation has {} entries for {} slices", d.len(), problem.len())));
    }
    if let Some(x) = d.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidProblem(format!("allocation entries must be nonnegative, got {x}")));
    }
    Ok(problem.value(d))
}

/// Euclidean projection of `z` onto `{y >= 0, sum_i w_i y_i = total}`.
pub fn project_weighted_simplex(z: &[f64], weights: &[f64], total: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..z.len()).collect();
    // Coordinates leave the support in order of decreasing z_i / w_i.
    order.sort_by(|&i, &j| (z[j] / weights[j]).total_cmp(&(z[i] / weights[i])));
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut tau = 0.0;
    for (k, &i) in order.iter().enumerate() {
        s1 += weights[i] * z[i];
        s2 += weights[i] * weights[i];
        let candidate = (s1 - total) / s2;
        let next = order.get(k + 1).map(|&j| z[j] / weights[j]);
        tau = candidate;
        if next.is_none_or(|t| candidate >= t) {
            break;
        }
    }
    z.iter().zip(weights).map(|(zi, wi)| (zi - tau * wi).max(0.0)).collect()
}

/// Continuous minimizer on the budget hyperplane.
///
/// Projected gradient descent with Armijo backtracking, run in budget-scaled
/// coordinates `u = d / B` so the step scale does not depend on `B`.
pub fn solve_continuous(problem: &AllocationProblem) -> Result<Vec<f64>> {
    let n = problem.len();
    let budget = problem.budget;
    if budget == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let costs = &problem.costs;
    let f = |u: &[f64]| -> f64 { (0..n).map(|i| problem.term(i, u[i] * budget)).sum() };

    let mut u: Vec<f64> = costs.iter().map(|c| 1.0 / (n as f64 * c)).collect();
    let mut value = f(&u);
    for _ in 0..MAX_ITERATIONS {
        let grad: Vec<f64> = (0..n).map(|i| problem.term_slope(i, u[i] * budget) * budget).collect();
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical("non-finite gradient in allocation solver".into()));
        }
        let mut step = STEP_INIT;
        let mut next = None;
        while step > 1e-20 {
            let z: Vec<f64> = u.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
            let cand = project_weighted_simplex(&z, costs, 1.0);
            let decrease: f64 = grad.iter().zip(cand.iter().zip(&u)).map(|(g, (c, x))| g * (c - x)).sum();
            let cand_value = f(&cand);
            if cand_value <= value + ARMIJO * decrease {
                next = Some((cand, cand_value));
                break;
            }
            step *= BACKTRACK;
        }
        let Some((cand, cand_value)) = next else { break };
        let change = (value - cand_value).abs() / value.abs().max(f64::MIN_POSITIVE);
        u = cand;
        value = cand_value;
        if change < REL_TOL {
            break;
        }
    }
    let d: Vec<f64> = u.iter().map(|x| x * budget).collect();
    let spent: f64 = d.iter().zip(costs).map(|(x, c)| x * c).sum();
    if (spent - budget).abs() > 1e-6 * budget {
        return Err(Error::Numerical(format!("solver left the budget plane: spent {spent} of {budget}")));
    }
    Ok(d)
}

/// Integer allocation that spends the budget as fully as whole examples allow.
///
/// The continuous optimum is floored, the leftover budget is handed out one
/// example at a time to the affordable slice with the largest objective
/// decrease per unit cost (lowest index on ties), and pairwise one-example
/// exchanges are then applied while they strictly lower the objective.
pub fn one_shot_allocate(problem: &AllocationProblem) -> Result<AllocationPlan> {
    let n = problem.len();
    let min_cost = problem.costs.iter().copied().fold(f64::INFINITY, f64::min);
    if problem.budget < min_cost {
        let zeros = vec![0.0; n];
        return Ok(AllocationPlan { d: vec![0; n], spent: 0.0, objective: problem.value(&zeros) });
    }
    let continuous = solve_continuous(problem)?;
    let mut d: Vec<u64> = continuous.iter().map(|x| (x + 1e-7).floor().max(0.0) as u64).collect();
    // The tolerance above can overshoot by a hair; back off if so.
    while problem.spend(&d) > problem.budget {
        let i = (0..n).filter(|&i| d[i] > 0).max_by(|&i, &j| problem.costs[i].total_cmp(&problem.costs[j]));
        match i {
            Some(i) => d[i] -= 1,
            None => break,
        }
    }
    fill_greedy(problem, &mut d);
    exchange_polish(problem, &mut d);

    let spent = problem.spend(&d);
    let objective = problem.value(&d.iter().map(|&x| x as f64).collect::<Vec<_>>());
    Ok(AllocationPlan { d, spent, objective })
}

fn gain(problem: &AllocationProblem, i: usize, d: u64) -> f64 {
    problem.term(i, d as f64) - problem.term(i, d as f64 + 1.0)
}

fn fill_greedy(problem: &AllocationProblem, d: &mut [u64]) {
    let mut spent = problem.spend(d);
    loop {
        let remaining = problem.budget - spent;
        let mut best: Option<(usize, f64)> = None;
        for (i, &di) in d.iter().enumerate() {
            if problem.costs[i] > remaining + 1e-9 {
                continue;
            }
            let g = gain(problem, i, di) / problem.costs[i];
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((i, g));
            }
        }
        let Some((i, _)) = best else { break };
        d[i] += 1;
        spent += problem.costs[i];
    }
}

fn exchange_polish(problem: &AllocationProblem, d: &mut [u64]) {
    let n = d.len();
    for _ in 0..MAX_EXCHANGES {
        let spent = problem.spend(d);
        let mut best: Option<(usize, usize, f64)> = None;
        for from in (0..n).filter(|&i| d[i] > 0) {
            let loss_from = problem.term(from, d[from] as f64 - 1.0) - problem.term(from, d[from] as f64);
            for to in (0..n).filter(|&j| j != from) {
                if spent - problem.costs[from] + problem.costs[to] > problem.budget + 1e-9 {
                    continue;
                }
                let delta = loss_from - gain(problem, to, d[to]);
                if delta < -1e-12 && best.is_none_or(|(_, _, b)| delta < b) {
                    best = Some((from, to, delta));
                }
            }
        }
        let Some((from, to, _)) = best else { break };
        d[from] -= 1;
        d[to] += 1;
        fill_greedy(problem, d);
    }
}
