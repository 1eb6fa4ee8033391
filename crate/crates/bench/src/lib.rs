//! Fixtures shared by the benchmarks.

use slicetuner_core::oracle::{SyntheticOracle, SyntheticWorld};
use slicetuner_core::{AllocationProblem, CurvePoint, PowerLawCurve, SlicePartition, SliceState};

pub fn curves(n: usize) -> Vec<PowerLawCurve> {
    (0..n).map(|i| PowerLawCurve::new(0.3 + 0.05 * (i % 8) as f64, 1.0 + i as f64, 0.0).unwrap()).collect()
}

pub fn sizes(n: usize) -> Vec<u64> {
    (0..n).map(|i| 100 + 37 * (i as u64 % 9)).collect()
}

pub fn problem(n: usize, budget: f64) -> AllocationProblem {
    AllocationProblem::new(curves(n), sizes(n), vec![1.0; n], budget, 1.0).unwrap()
}

pub fn partition(n: usize) -> SlicePartition {
    SlicePartition::new(
        sizes(n).into_iter().enumerate().map(|(i, s)| SliceState::new(format!("s{i}"), s, 1.0, 500).unwrap()).collect(),
    )
    .unwrap()
}

pub fn oracle(n: usize) -> SyntheticOracle {
    let p = partition(n);
    let world = SyntheticWorld::builder(p.ids(), curves(n), p.sizes()).noise_sigma(0.01).seed(1).build().unwrap();
    SyntheticOracle::new(world)
}

/// Ten noise-free points on `3 x^-0.5 + 0.05`.
pub fn points() -> Vec<CurvePoint> {
    (1..=10u64).map(|k| CurvePoint::sized(50 * k, 3.0 * (50.0 * k as f64).powf(-0.5) + 0.05)).collect()
}
