use crate::error::{Error, Result};
use crate::model::SlicePartition;
use crate::optimizer::AllocationPlan;

fn check_budget(budget: f64) -> Result<()> {
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(Error::invalid(format!("budget must be nonnegative, got {budget}")));
    }
    Ok(())
}

fn plan(d: Vec<u64>, costs: &[f64]) -> AllocationPlan {
    let spent = d.iter().zip(costs).map(|(&x, c)| x as f64 * c).sum();
    AllocationPlan { d, spent, objective: 0.0 }
}

/// Equal number of new examples for every slice; leftover budget goes one
/// example at a time in slice order, cycling while anything is affordable.
pub fn uniform_allocate(partition: &SlicePartition, budget: f64) -> Result<AllocationPlan> {
    check_budget(budget)?;
    let costs = partition.costs();
    let unit: f64 = costs.iter().sum();
    let each = (budget / unit + 1e-9).floor() as u64;
    let mut d = vec![each; costs.len()];
    let mut remaining = budget - each as f64 * unit;
    loop {
        let mut added = false;
        for (i, &c) in costs.iter().enumerate() {
            if c <= remaining + 1e-9 {
                d[i] += 1;
                remaining -= c;
                added = true;
            }
        }
        if !added {
            break;
        }
    }
    Ok(plan(d, &costs))
}

/// Raises the smallest slices toward a common level that exhausts the budget.
///
/// The level solves `sum_i C_i * max(0, level - |s_i|) = B` by bisection;
/// each slice gets the whole-example part of its gap and the remaining budget
/// goes to whichever affordable slice is currently smallest.
pub fn water_filling_allocate(partition: &SlicePartition, budget: f64) -> Result<AllocationPlan> {
    check_budget(budget)?;
    let costs = partition.costs();
    let sizes: Vec<f64> = partition.sizes().iter().map(|&s| s as f64).collect();
    let fill = |level: f64| -> f64 { sizes.iter().zip(&costs).map(|(s, c)| c * (level - s).max(0.0)).sum() };
    let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lo = sizes.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = sizes.iter().copied().fold(f64::NEG_INFINITY, f64::max) + budget / min_cost + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let level = lo;
    let mut d: Vec<u64> = sizes.iter().map(|s| ((level - s).max(0.0) + 1e-9).floor() as u64).collect();
    let mut remaining = budget - d.iter().zip(&costs).map(|(&x, c)| x as f64 * c).sum::<f64>();
    loop {
        let pick = (0..d.len())
            .filter(|&i| costs[i] <= remaining + 1e-9)
            .min_by(|&i, &j| (sizes[i] + d[i] as f64).total_cmp(&(sizes[j] + d[j] as f64)));
        let Some(i) = pick else { break };
        d[i] += 1;
        remaining -= costs[i];
    }
    Ok(plan(d, &costs))
}
