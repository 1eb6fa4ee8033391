//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use slicetuner_core::acquisition::run_iterative;
use slicetuner_core::curves::{estimate_curves, weighted_residual};
use slicetuner_core::harness::{compare_estimation_modes, run_experiment, ComparisonReport, Method, OracleSection};
use slicetuner_core::oracle::{CountingOracle, SyntheticOracle, SyntheticWorld};
use slicetuner_core::{
    fit_power_law, normalize_costs, objective, one_shot_allocate, unfairness, CurveEstimationConfig, CurvePoint,
    IterativeConfig, LimitStrategy, PowerLawCurve, SlicePartition, SliceState,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))
}

fn worked_example() -> Check {
    let start = Instant::now();
    let truth = vec![PowerLawCurve::new(1.0, 1.0, 0.0).unwrap(), PowerLawCurve::new(1.0, 6.25, 0.0).unwrap()];
    let world = SyntheticWorld::builder(vec!["s1".into(), "s2".into()], truth, vec![5, 10]).build().unwrap();
    let mut oracle = SyntheticOracle::new(world);
    let partition = SlicePartition::new(vec![
        SliceState::new("s1", 5, 1.0, 500).unwrap(),
        SliceState::new("s2", 10, 1.0, 500).unwrap(),
    ])
    .unwrap();
    let curves = CurveEstimationConfig { num_subsets: 5, num_repeats: 1, min_fraction: 0.2, ..Default::default() };
    let cfg = IterativeConfig {
        min_slice_size: 10,
        initial_limit: 1.0,
        strategy: LimitStrategy::Moderate(1.0),
        lambda: 1.0,
        max_iterations: 1,
    };
    let log = run_iterative(&partition, &mut oracle, &curves, &cfg, 55.0).map_err(|e| e.to_string())?;
    ensure(log.top_up == vec![5, 0], format!("top-up {:?}", log.top_up))?;
    let it = log.iterations.first().ok_or("no iteration ran")?;
    ensure(it.sizes_before == vec![10, 10], format!("sizes {:?}", it.sizes_before))?;
    ensure(it.imbalance_ratio_before == 1.0, format!("IR {}", it.imbalance_ratio_before))?;
    ensure(it.plan.d == vec![10, 40], format!("plan {:?}", it.plan.d))?;
    ensure(it.change_ratio == Some(0.5), format!("x {:?}", it.change_ratio))?;
    ensure(it.acquired == vec![5, 20], format!("acquired {:?}", it.acquired))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("top-up [5,0], IR 1, plan [10,40], x 0.5, acquired [5,20] in {:?}", start.elapsed()))
}

fn unfairness_exactness() -> Check {
    let start = Instant::now();
    let before = unfairness(&[5.0, 3.0], 4.0).map_err(|e| e.to_string())?.0;
    let after = unfairness(&[2.0, 3.0], 2.4).map_err(|e| e.to_string())?.0;
    ensure(before == 1.0 && after == 0.5, format!("got {before} and {after}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok("1.0 before, 0.5 after".into())
}

fn cost_normalization() -> Check {
    let times = [82.1, 81.9, 67.6, 79.3, 94.8, 77.5, 91.6, 104.6];
    let costs = normalize_costs(&times).map_err(|e| e.to_string())?;
    let expected = [1.2, 1.2, 1.0, 1.2, 1.4, 1.1, 1.4, 1.5];
    ensure(costs.iter().zip(expected).all(|(c, e)| c.to_bits() == f64::to_bits(e)), format!("got {costs:?}"))?;
    Ok(format!("{costs:?}"))
}

/// Weighted least-squares residual minimized over b for each exponent on a
/// dense grid (c = 0): b has a closed form once a is fixed.
fn grid_residual(points: &[CurvePoint]) -> f64 {
    let mut best = f64::INFINITY;
    let steps = 200_000;
    for i in 1..=steps {
        let a = 3.0 * i as f64 / steps as f64;
        let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), p| {
            let g = p.size.powf(-a);
            (n + p.weight * p.loss * g, d + p.weight * g * g)
        });
        let b = num / den;
        if b > 0.0 {
            best = best.min(weighted_residual(points, &PowerLawCurve { a, b, c: 0.0 }));
        }
    }
    best
}

fn curve_fit_identifiability() -> Check {
    let start = Instant::now();
    let mut rng = common::rng(11);
    let mut worst_rel: f64 = 0.0;
    for _ in 0..20 {
        let truth = PowerLawCurve::new(rng.random_range(0.1..1.5), rng.random_range(0.5..20.0), 0.0).unwrap();
        let points: Vec<CurvePoint> =
            (1..=10u64).map(|k| CurvePoint::sized(30 * k, truth.predict((30 * k) as f64))).collect();
        let fit = fit_power_law(&points, false).map_err(|e| e.to_string())?.curve;
        let rel = ((fit.a - truth.a) / truth.a).abs().max(((fit.b - truth.b) / truth.b).abs());
        worst_rel = worst_rel.max(rel);
    }
    ensure(worst_rel <= 1e-4, format!("noiseless worst relative error {worst_rel:e}"))?;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..10 {
        let truth = PowerLawCurve::new(rng.random_range(0.2..1.0), rng.random_range(1.0..10.0), 0.0).unwrap();
        let points: Vec<CurvePoint> = (1..=10u64)
            .map(|k| {
                let s = 25 * k;
                let noisy = truth.predict(s as f64) * (1.0 + rng.random_range(-0.1..0.1));
                CurvePoint::sized(s, noisy)
            })
            .collect();
        let fit = fit_power_law(&points, false).map_err(|e| e.to_string())?.curve;
        let ours = weighted_residual(&points, &fit);
        let oracle = grid_residual(&points);
        worst_ratio = worst_ratio.max(ours / oracle);
    }
    ensure(worst_ratio <= 1.01, format!("noisy residual ratio to grid oracle {worst_ratio}"))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("noiseless rel err {worst_rel:.1e}, noisy residual/grid {worst_ratio:.6}"))
}

fn optimizer_oracle() -> Check {
    let start = Instant::now();
    let mut rng = common::rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=3);
        let budget = rng.random_range(0..=100u64);
        let lambda = [0.0, 0.1, 1.0, 10.0][rng.random_range(0..4)];
        let problem = common::random_problem(&mut rng, n, budget as f64, lambda);
        let plan = one_shot_allocate(&problem).map_err(|e| e.to_string())?;
        let (grid, _) = common::grid_minimum(&problem, budget);
        worst = worst.max(plan.objective - grid);
    }
    ensure(worst <= 1e-3, format!("worst gap {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("worst gap to integer grid {worst:.2e}"))
}

fn convexity_probe() -> Check {
    let mut rng = common::rng(17);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let budget = rng.random_range(1.0..500.0);
        let lambda = rng.random_range(0.0..10.0);
        let problem = common::random_problem(&mut rng, n, budget, lambda);
        let d1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..budget)).collect();
        let d2: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..budget)).collect();
        let mid: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| 0.5 * (a + b)).collect();
        let f = |d: &[f64]| objective(&problem, d).unwrap();
        if f(&mid) > 0.5 * (f(&d1) + f(&d2)) + 1e-9 {
            violations += 1;
        }
    }
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok("0 violations in 1000 triples".into())
}

/// Every acquiring run spends at most B and leaves less than the largest
/// per-example cost (unit costs throughout; all true curves strictly decrease).
fn budget_feasibility(reports: &[ComparisonReport]) -> Check {
    let mut checked = 0;
    for report in reports {
        for t in &report.trials {
            if t.report.is_none() || t.method == Method::Original {
                continue;
            }
            checked += 1;
            ensure(
                t.spent <= t.budget + 1e-9,
                format!("{} trial {} spent {} of {}", t.method, t.trial, t.spent, t.budget),
            )?;
            ensure(
                t.budget - t.spent < 1.0 + 1e-9,
                format!("{} trial {} left {} unspent ({})", t.method, t.trial, t.budget - t.spent, t.stop_reason),
            )?;
        }
    }
    ensure(checked > 0, "no runs to check")?;
    Ok(format!("{checked} runs within budget, residual below max cost"))
}

fn baseline_domination(report: &ComparisonReport, budget: f64, elapsed: Duration) -> Check {
    let m = report.summary(Method::Moderate, budget).ok_or("missing moderate")?;
    for base in [Method::Uniform, Method::WaterFilling] {
        let b = report.summary(base, budget).ok_or("missing baseline")?;
        ensure(m.loss_mean <= b.loss_mean, format!("loss {} > {base} {}", m.loss_mean, b.loss_mean))?;
        ensure(
            m.avg_eer_mean <= 0.95 * b.avg_eer_mean,
            format!("avg EER {} not 5% below {base} {}", m.avg_eer_mean, b.avg_eer_mean),
        )?;
    }
    within(elapsed, Duration::from_secs(60))?;
    let u = report.summary(Method::Uniform, budget).unwrap();
    let w = report.summary(Method::WaterFilling, budget).unwrap();
    Ok(format!(
        "loss {:.4} vs {:.4}/{:.4}, avg EER {:.4} vs {:.4}/{:.4}",
        m.loss_mean, u.loss_mean, w.loss_mean, m.avg_eer_mean, u.avg_eer_mean, w.avg_eer_mean
    ))
}

fn lambda_tradeoff(runs: &mut Vec<ComparisonReport>) -> Check {
    let start = Instant::now();
    let mut rows = Vec::new();
    for lambda in [0.0, 0.1, 1.0, 10.0] {
        let mut cfg = common::heterogeneous_config(vec![Method::Moderate], 10);
        cfg.lambda = lambda;
        let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
        let s = report.summaries[0].clone();
        runs.push(report);
        ensure(s.failures == 0, format!("{} failures at lambda {lambda}", s.failures))?;
        rows.push((lambda, s));
    }
    for w in rows.windows(2) {
        let (l0, a) = &w[0];
        let (l1, b) = &w[1];
        let eer_se = a.avg_eer_se.hypot(b.avg_eer_se);
        let loss_se = a.loss_se.hypot(b.loss_se);
        ensure(
            b.avg_eer_mean <= a.avg_eer_mean + eer_se,
            format!("avg EER rises from {} at {l0} to {} at {l1}", a.avg_eer_mean, b.avg_eer_mean),
        )?;
        ensure(
            b.loss_mean >= a.loss_mean - loss_se,
            format!("loss falls from {} at {l0} to {} at {l1}", a.loss_mean, b.loss_mean),
        )?;
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(rows
        .iter()
        .map(|(l, s)| format!("λ={l}: {:.4}/{:.4}", s.loss_mean, s.avg_eer_mean))
        .collect::<Vec<_>>()
        .join(", "))
}

fn strategy_ordering(runs: &mut Vec<ComparisonReport>) -> Check {
    // Equal starting sizes, so the imbalance limit binds.
    let mut cfg = common::heterogeneous_config(vec![Method::Conservative, Method::Moderate, Method::Aggressive], 10);
    for s in &mut cfg.slices {
        s.size = 300;
    }
    cfg.budget = 4500.0;
    let budget = cfg.budget;
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    runs.push(report.clone());
    let c = report.records(Method::Conservative, budget);
    let m = report.records(Method::Moderate, budget);
    let a = report.records(Method::Aggressive, budget);
    ensure(c.len() == 10 && m.len() == 10 && a.len() == 10, "missing runs")?;
    let mut counts = Vec::new();
    for ((c, m), a) in c.iter().zip(&m).zip(&a) {
        ensure(
            c.iterations >= m.iterations && m.iterations + 1 >= a.iterations,
            format!("trial {}: {} / {} / {}", c.trial, c.iterations, m.iterations, a.iterations),
        )?;
        counts.push(format!("{}/{}/{}", c.iterations, m.iterations, a.iterations));
    }
    Ok(format!("iterations C/M/A per trial: {}", counts.join(" ")))
}

fn estimation_modes() -> Check {
    let partition =
        SlicePartition::new((0..10).map(|i| SliceState::new(format!("s{i}"), 300, 1.0, 500).unwrap()).collect())
            .unwrap();
    let truth = vec![PowerLawCurve::new(0.5, 3.0, 0.0).unwrap(); 10];
    let world = SyntheticWorld::builder(partition.ids(), truth, partition.sizes()).build().unwrap();
    let mut counts = Vec::new();
    for mode in [slicetuner_core::EstimationMode::Amortized, slicetuner_core::EstimationMode::Exhaustive] {
        let mut oracle = CountingOracle::new(SyntheticOracle::new(world.clone()));
        let cfg = CurveEstimationConfig { mode, ..Default::default() };
        estimate_curves(&mut oracle, &partition, &cfg).map_err(|e| e.to_string())?;
        counts.push(oracle.evaluations());
    }
    ensure(counts == vec![50, 500], format!("query counts {counts:?}"))?;

    let cfg = common::heterogeneous_config(vec![Method::Moderate], 10);
    let cmp = compare_estimation_modes(&cfg).map_err(|e| e.to_string())?;
    ensure(cmp.amortized.queries_per_estimate == 50, format!("amortized {}", cmp.amortized.queries_per_estimate))?;
    ensure(cmp.exhaustive.queries_per_estimate == 500, format!("exhaustive {}", cmp.exhaustive.queries_per_estimate))?;
    let rel = (cmp.amortized.loss_mean - cmp.exhaustive.loss_mean).abs() / cmp.exhaustive.loss_mean;
    ensure(rel <= 0.10, format!("loss differs by {:.1}%", rel * 100.0))?;
    Ok(format!(
        "50 vs 500 queries per estimate, loss {:.4} vs {:.4} ({:.2}% apart)",
        cmp.amortized.loss_mean,
        cmp.exhaustive.loss_mean,
        rel * 100.0
    ))
}

fn unreliable_curves(runs: &mut Vec<ComparisonReport>) -> Check {
    let a: Vec<f64> = [0.45, 0.5, 0.4, 0.55, 0.5, 0.45, 0.6, 0.5, 0.4, 0.55].iter().map(|x| x * 0.3).collect();
    let b: Vec<f64> = [1.0, 2.0, 3.0, 1.5, 4.0, 6.0, 5.0, 2.5, 2.0, 8.0].iter().map(|x| x * 0.3).collect();
    let sizes = [40, 25, 30, 20, 35, 40, 22, 30, 28, 36];
    let mut cfg =
        common::scenario_config(&a, &b, &sizes, vec![Method::Uniform, Method::WaterFilling, Method::Moderate], 10);
    if let OracleSection::Synthetic(s) = &mut cfg.oracle {
        s.noise_sigma = 0.1;
    }
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    runs.push(report.clone());
    let moderate = report.records(Method::Moderate, cfg.budget);
    ensure(moderate.len() == 10, "missing moderate runs")?;
    let unreliable: usize = moderate.iter().map(|t| t.unreliable_curves).sum();
    ensure(2 * unreliable >= 10 * moderate.len(), format!("only {unreliable} of 100 first fits unreliable"))?;
    let m = report.summary(Method::Moderate, cfg.budget).unwrap();
    for base in [Method::Uniform, Method::WaterFilling] {
        let s = report.summary(base, cfg.budget).unwrap();
        ensure(m.loss_mean <= s.loss_mean, format!("loss {} > {base} {}", m.loss_mean, s.loss_mean))?;
        ensure(m.avg_eer_mean <= s.avg_eer_mean, format!("avg EER {} > {base} {}", m.avg_eer_mean, s.avg_eer_mean))?;
    }
    Ok(format!(
        "{unreliable}/100 first fits unreliable; moderate loss {:.4}, avg EER {:.4}",
        m.loss_mean, m.avg_eer_mean
    ))
}

fn main() {
    let start = Instant::now();
    let main_cfg = common::heterogeneous_config(Method::ALL.to_vec(), 10);
    let main_report = run_experiment(&main_cfg);
    let main_elapsed = start.elapsed();
    let main_report = match main_report {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL heterogeneous experiment could not run: {e}");
            std::process::exit(1);
        }
    };
    let budget = main_cfg.budget;

    let mut runs = Vec::new();
    let mut results: Vec<(&str, Check)> = vec![
        ("worked example", worked_example()),
        ("unfairness exactness", unfairness_exactness()),
        ("cost normalization", cost_normalization()),
        ("curve fit identifiability", curve_fit_identifiability()),
        ("optimizer oracle equivalence", optimizer_oracle()),
        ("convexity probe", convexity_probe()),
        ("baseline domination", baseline_domination(&main_report, budget, main_elapsed)),
        ("lambda tradeoff", lambda_tradeoff(&mut runs)),
        ("strategy ordering", strategy_ordering(&mut runs)),
        ("estimation-mode efficiency", estimation_modes()),
        ("unreliable-curve robustness", unreliable_curves(&mut runs)),
    ];
    runs.push(main_report);
    results.insert(6, ("budget feasibility", budget_feasibility(&runs)));
    let mut failed = 0;
    for (name, result) in &results {
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed in {:?}", results.len() - failed, results.len(), start.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
