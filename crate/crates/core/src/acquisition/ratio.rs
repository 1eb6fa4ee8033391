use serde::{Deserialize, Serialize};

use super::LimitStrategy;
use crate::error::{Error, Result};

const MONOTONE_SAMPLES: usize = 64;
const SCAN_POINTS: usize = 4096;
const BISECT_TOL: f64 = 1e-13;

/// `max(sizes) / min(sizes)`; every size must be positive.
pub fn get_imbalance_ratio(sizes: &[u64]) -> Result<f64> {
    if sizes.is_empty() {
        return Err(Error::invalid("imbalance ratio of an empty size list"));
    }
    if sizes.contains(&0) {
        return Err(Error::invalid("imbalance ratio is undefined with an empty slice"));
    }
    let max = *sizes.iter().max().expect("nonempty") as f64;
    let min = *sizes.iter().min().expect("nonempty") as f64;
    Ok(max / min)
}

/// Real-valued imbalance ratio for fractional sizes.
pub fn imbalance_ratio(sizes: &[f64]) -> f64 {
    let max = sizes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = sizes.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeRatio {
    pub ratio: f64,
    /// False when no positive scaling keeps the ratio change within the limit.
    pub feasible: bool,
}

/// Largest `x` in `(0, 1]` such that acquiring `x * num_examples` moves the
/// imbalance ratio by no more than `|target_ratio - IR(sizes)|`.
///
/// If the ratio is monotone in `x` (checked on a 64-point sample) the
/// boundary is found by bisection. Otherwise a 4096-point scan locates the
/// largest feasible grid point and bisection refines the crossing after it.
pub fn get_change_ratio(sizes: &[u64], num_examples: &[f64], target_ratio: f64) -> Result<ChangeRatio> {
    if sizes.len() != num_examples.len() {
        return Err(Error::invalid("sizes and num_examples differ in length"));
    }
    if num_examples.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::invalid("num_examples must be nonnegative"));
    }
    if !(target_ratio.is_finite() && target_ratio >= 1.0) {
        return Err(Error::invalid(format!("target ratio must be >= 1, got {target_ratio}")));
    }
    let start = get_imbalance_ratio(sizes)?;
    let limit = (target_ratio - start).abs();
    let ir_at = |x: f64| -> f64 {
        let s: Vec<f64> = sizes.iter().zip(num_examples).map(|(&s, &d)| s as f64 + x * d).collect();
        imbalance_ratio(&s)
    };
    let feasible = |x: f64| (ir_at(x) - start).abs() <= limit + 1e-12;

    if feasible(1.0) {
        return Ok(ChangeRatio { ratio: 1.0, feasible: true });
    }

    let samples: Vec<f64> = (0..MONOTONE_SAMPLES).map(|k| ir_at(k as f64 / (MONOTONE_SAMPLES - 1) as f64)).collect();
    let nondecreasing = samples.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let nonincreasing = samples.windows(2).all(|w| w[1] <= w[0] + 1e-12);

    let (lo, hi) = if nondecreasing || nonincreasing {
        (0.0, 1.0)
    } else {
        let best = (0..=SCAN_POINTS).rev().map(|k| k as f64 / SCAN_POINTS as f64).find(|&x| feasible(x)).unwrap_or(0.0);
        (best, (best + 1.0 / SCAN_POINTS as f64).min(1.0))
    };
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 1e-9 {
        return Ok(ChangeRatio { ratio: 0.0, feasible: false });
    }
    // Near the crossing the extreme slices are fixed, so IR is a ratio of
    // linear functions and the boundary has a closed form.
    let grown = |x: f64| -> Vec<f64> { sizes.iter().zip(num_examples).map(|(&s, &d)| s as f64 + x * d).collect() };
    let at = grown(lo);
    let imax = (0..at.len()).max_by(|&a, &b| at[a].total_cmp(&at[b])).unwrap_or(0);
    let imin = (0..at.len()).min_by(|&a, &b| at[a].total_cmp(&at[b])).unwrap_or(0);
    let bound = if ir_at(hi) > start { start + limit } else { start - limit };
    let (smax, smin) = (sizes[imax] as f64, sizes[imin] as f64);
    let exact = (bound * smin - smax) / (num_examples[imax] - bound * num_examples[imin]);
    if exact.is_finite() && exact > 0.0 && (exact - lo).abs() <= 1e-9 && feasible(exact) {
        lo = exact;
    }
    Ok(ChangeRatio { ratio: lo, feasible: true })
}

/// Next imbalance-change limit under `strategy`.
pub fn increase_limit(limit: f64, strategy: LimitStrategy) -> f64 {
    match strategy {
        LimitStrategy::Conservative => limit,
        LimitStrategy::Moderate(c) => limit + c,
        LimitStrategy::Aggressive(c) => c * limit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Largest x on a dense grid whose ratio change stays within the limit.
    fn dense_scan(sizes: &[u64], d: &[f64], target: f64, points: usize) -> f64 {
        let start = get_imbalance_ratio(sizes).unwrap();
        let limit = (target - start).abs();
        (0..=points)
            .rev()
            .map(|k| k as f64 / points as f64)
            .find(|&x| {
                let s: Vec<f64> = sizes.iter().zip(d).map(|(&s, &d)| s as f64 + x * d).collect();
                let ir = s.iter().copied().fold(f64::MIN, f64::max) / s.iter().copied().fold(f64::MAX, f64::min);
                (ir - start).abs() <= limit
            })
            .unwrap()
    }

    #[test]
    fn imbalance_examples() {
        assert_eq!(get_imbalance_ratio(&[10, 20, 30]).unwrap(), 3.0);
        assert_eq!(get_imbalance_ratio(&[7, 7, 7]).unwrap(), 1.0);
        assert_eq!(get_imbalance_ratio(&[15, 30]).unwrap(), 2.0);
        assert!(get_imbalance_ratio(&[0, 3]).is_err());
        assert!(get_imbalance_ratio(&[]).is_err());
    }

    #[test]
    fn walkthrough_change_ratio() {
        let r = get_change_ratio(&[10, 10], &[10.0, 40.0], 2.0).unwrap();
        assert!(r.feasible);
        assert_eq!(r.ratio, 0.5);
    }

    #[test]
    fn no_limiting_needed_returns_one() {
        let sizes = [12, 30, 7];
        let d = [5.0, 1.0, 40.0];
        let s: Vec<u64> = sizes.iter().zip(&d).map(|(s, d)| s + *d as u64).collect();
        let target = get_imbalance_ratio(&s).unwrap();
        assert_eq!(get_change_ratio(&sizes, &d, target).unwrap().ratio, 1.0);
    }

    #[test]
    fn non_monotone_matches_dense_scan() {
        // IR falls from 2 to 1 at x = 1/6, then rises to 3.5 at x = 1.
        let sizes = [100, 50];
        let d = [0.0, 300.0];
        let target = 3.0;
        let r = get_change_ratio(&sizes, &d, target).unwrap();
        let oracle = dense_scan(&sizes, &d, target, 1_000_000);
        assert!((r.ratio - oracle).abs() < 1e-4, "{} vs {}", r.ratio, oracle);
        assert!((r.ratio - 5.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn decreasing_direction() {
        // IR 5 -> 1.25 when everything lands; the limit of 1 stops at 4.
        let sizes = [500, 100];
        let d = [0.0, 300.0];
        let r = get_change_ratio(&sizes, &d, 4.0).unwrap();
        assert!((r.ratio - 25.0 / 300.0).abs() < 1e-9, "{r:?}");
        let oracle = dense_scan(&sizes, &d, 4.0, 1_000_000);
        assert!((r.ratio - oracle).abs() < 1e-4);
    }

    #[test]
    fn infeasible_returns_zero() {
        // Any positive step changes IR by more than the zero limit.
        let r = get_change_ratio(&[10, 10], &[0.0, 5.0], 1.0).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn limits() {
        assert_eq!(increase_limit(1.0, LimitStrategy::Conservative), 1.0);
        assert_eq!(increase_limit(1.0, LimitStrategy::Moderate(1.0)), 2.0);
        assert_eq!(increase_limit(3.0, LimitStrategy::Aggressive(2.0)), 6.0);
    }
}
