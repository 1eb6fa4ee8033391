#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slicetuner_core::optimizer::AllocationProblem;
use slicetuner_core::PowerLawCurve;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum objective over every integer allocation with `sum d = budget`
/// (unit costs), by enumeration.
pub fn grid_minimum(problem: &AllocationProblem, budget: u64) -> (f64, Vec<u64>) {
    let n = problem.len();
    let mut best = (f64::INFINITY, vec![]);
    let mut d = vec![0u64; n];
    fn recurse(problem: &AllocationProblem, d: &mut Vec<u64>, i: usize, left: u64, best: &mut (f64, Vec<u64>)) {
        let n = d.len();
        if i == n - 1 {
            d[i] = left;
            let x: Vec<f64> = d.iter().map(|&v| v as f64).collect();
            let v = slicetuner_core::objective(problem, &x).unwrap();
            if v < best.0 {
                *best = (v, d.clone());
            }
            return;
        }
        for take in 0..=left {
            d[i] = take;
            recurse(problem, d, i + 1, left - take, best);
        }
    }
    recurse(problem, &mut d, 0, budget, &mut best);
    best
}

pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, budget: f64, lambda: f64) -> AllocationProblem {
    let curves = (0..n)
        .map(|_| PowerLawCurve::new(rng.random_range(0.1..2.0), rng.random_range(0.1..20.0), 0.0).unwrap())
        .collect();
    let sizes = (0..n).map(|_| rng.random_range(1..200)).collect();
    AllocationProblem::new(curves, sizes, vec![1.0; n], budget, lambda).unwrap()
}

use slicetuner_core::harness::{
    CurvesSection, ExperimentConfig, IterativeSection, Method, OracleSection, SliceSpec, SyntheticSpec, SCHEMA_VERSION,
};

/// Ten slices with distinct curves and uneven starting sizes.
pub fn heterogeneous_config(methods: Vec<Method>, trials: usize) -> ExperimentConfig {
    let a = [0.45, 0.5, 0.4, 0.55, 0.5, 0.45, 0.6, 0.5, 0.4, 0.55];
    let b = [1.0, 2.0, 3.0, 1.5, 4.0, 6.0, 5.0, 2.5, 2.0, 8.0];
    let sizes = [400u64, 150, 300, 100, 250, 350, 120, 200, 180, 320];
    scenario_config(&a, &b, &sizes, methods, trials)
}

pub fn scenario_config(a: &[f64], b: &[f64], sizes: &[u64], methods: Vec<Method>, trials: usize) -> ExperimentConfig {
    let n = a.len();
    let mut kappa = vec![vec![0.0; n]; n];
    for (j, row) in kappa.iter_mut().enumerate() {
        for (l, k) in row.iter_mut().enumerate() {
            if j != l {
                *k = if (j + l) % 2 == 0 { 0.002 } else { -0.002 };
            }
        }
    }
    let total: u64 = sizes.iter().sum();
    ExperimentConfig {
        schema_version: SCHEMA_VERSION.into(),
        name: "heterogeneous".into(),
        methods,
        budget: 1.5 * total as f64,
        budgets: None,
        lambda: 1.0,
        num_trials: trials,
        seed: 2024,
        validation_size: 500,
        output_dir: None,
        slices: sizes
            .iter()
            .enumerate()
            .map(|(i, &s)| SliceSpec {
                id: format!("s{i}"),
                size: s,
                cost: Some(1.0),
                avg_time: None,
                validation_size: None,
            })
            .collect(),
        oracle: OracleSection::Synthetic(SyntheticSpec {
            a: a.to_vec(),
            b: b.to_vec(),
            c: None,
            noise_sigma: 0.01,
            kappa: Some(kappa),
            kappa_max: 0.2,
            pool_limit: None,
        }),
        curves: CurvesSection::default(),
        iterative: IterativeSection::default(),
    }
}
