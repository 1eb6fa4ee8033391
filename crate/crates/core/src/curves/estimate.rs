use std::path::Path;

use super::{
    fit_power_law, subset_schedule, CurveEstimationConfig, CurvePoint, EstimationMode, PowerLawCurve, FLAT_EXPONENT,
};
use crate::error::{Error, Result};
use crate::model::SlicePartition;
use crate::oracle::{subset_size, EvalQuery, LossOracle};
use crate::seed;

/// Fits whose residual-to-signal ratio exceeds this are flagged unreliable.
pub const UNRELIABLE_RATIO: f64 = 0.5;

/// One measured loss for a slice subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub repeat: usize,
    pub fraction: f64,
    pub subset_size: u64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceCurve {
    pub curve: PowerLawCurve,
    pub reliable: bool,
    pub converged: bool,
    pub residual_to_signal: f64,
    pub observations: Vec<Observation>,
}

/// Estimates one learning curve per slice from subset-trained losses.
///
/// Losses observed at the same fraction are averaged across repeats and the
/// averages are fit once, weighted by subset size. In amortized mode each
/// query shrinks every slice at once, so exactly `K * R` queries are issued;
/// exhaustive mode shrinks one slice at a time (`n * K * R` queries).
pub fn estimate_curves<O: LossOracle + ?Sized>(
    oracle: &mut O,
    partition: &SlicePartition,
    config: &CurveEstimationConfig,
) -> Result<Vec<SliceCurve>> {
    let fractions = subset_schedule(config)?;
    let n = partition.len();
    if oracle.num_slices() != n {
        return Err(Error::invalid(format!("oracle has {} slices, partition has {n}", oracle.num_slices())));
    }
    for s in partition.slices() {
        if (s.size as f64) * config.min_fraction < 2.0 {
            return Err(Error::invalid(format!(
                "slice {} (size {}) is too small for min_fraction {}",
                s.id, s.size, config.min_fraction
            )));
        }
    }

    let sizes = partition.sizes();
    let mut observations: Vec<Vec<Observation>> = vec![Vec::new(); n];
    for repeat in 0..config.num_repeats {
        let repeat_seed = seed::mix(config.seed, repeat as u64);
        match config.mode {
            EstimationMode::Amortized => {
                for (k, &f) in fractions.iter().enumerate() {
                    let query = EvalQuery::fractions(vec![f; n], seed::mix(repeat_seed, k as u64));
                    let losses = oracle.evaluate(&query)?;
                    for (i, obs) in observations.iter_mut().enumerate() {
                        obs.push(Observation {
                            repeat,
                            fraction: f,
                            subset_size: subset_size(sizes[i], f),
                            loss: losses[i],
                        });
                    }
                }
            }
            EstimationMode::Exhaustive => {
                for (i, obs) in observations.iter_mut().enumerate() {
                    for (k, &f) in fractions.iter().enumerate() {
                        let mut fr = vec![1.0; n];
                        fr[i] = f;
                        let tag = (i * fractions.len() + k) as u64;
                        let losses = oracle.evaluate(&EvalQuery::fractions(fr, seed::mix(repeat_seed, tag)))?;
                        obs.push(Observation {
                            repeat,
                            fraction: f,
                            subset_size: subset_size(sizes[i], f),
                            loss: losses[i],
                        });
                    }
                }
            }
        }
    }

    Ok(observations.into_iter().map(|obs| fit_slice(obs, &fractions, config)).collect())
}

fn fit_slice(observations: Vec<Observation>, fractions: &[f64], config: &CurveEstimationConfig) -> SliceCurve {
    let points: Vec<CurvePoint> = fractions
        .iter()
        .map(|&f| {
            let at: Vec<&Observation> = observations.iter().filter(|o| o.fraction == f).collect();
            let loss = at.iter().map(|o| o.loss).sum::<f64>() / at.len() as f64;
            CurvePoint::sized(at[0].subset_size, loss)
        })
        .collect();
    match fit_power_law(&points, config.fit_floor) {
        Ok(fit) => SliceCurve {
            curve: fit.curve,
            reliable: fit.converged && fit.residual_to_signal <= UNRELIABLE_RATIO,
            converged: fit.converged,
            residual_to_signal: fit.residual_to_signal,
            observations,
        },
        Err(e) => {
            log::debug!("curve fit failed ({e}); using flat fallback");
            let last = points.last().map_or(0.0, |p| p.loss);
            SliceCurve {
                curve: PowerLawCurve { a: FLAT_EXPONENT, b: last.max(1e-12), c: 0.0 },
                reliable: false,
                converged: false,
                residual_to_signal: f64::INFINITY,
                observations,
            }
        }
    }
}

/// Writes every observation with its slice's fitted parameters.
pub fn write_observations_csv(path: &Path, slice_ids: &[String], curves: &[SliceCurve]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record([
        "slice_id",
        "repeat",
        "fraction",
        "subset_size",
        "loss",
        "fitted_a",
        "fitted_b",
        "fitted_c",
        "reliable_flag",
    ])
    .map_err(|e| Error::csv(path, e))?;
    for (id, sc) in slice_ids.iter().zip(curves) {
        for o in &sc.observations {
            w.write_record([
                id.clone(),
                o.repeat.to_string(),
                o.fraction.to_string(),
                o.subset_size.to_string(),
                o.loss.to_string(),
                sc.curve.a.to_string(),
                sc.curve.b.to_string(),
                sc.curve.c.to_string(),
                u8::from(sc.reliable).to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
