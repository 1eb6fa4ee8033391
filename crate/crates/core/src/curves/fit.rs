//! Weighted nonlinear least squares for power-law curves.
//!
//! Parameters are optimized as `(a, ln b[, c])` with a Levenberg-Marquardt
//! style damped Gauss-Newton iteration. `a` and `c` are projected back onto
//! their feasible ranges after each step.

use nalgebra::{DMatrix, DVector};

use super::{CurvePoint, PowerLawCurve, FLAT_EXPONENT};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const INITIAL_DAMPING: f64 = 1e-3;
const MAX_DAMPING: f64 = 1e16;
const PARAM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFit {
    pub curve: PowerLawCurve,
    /// False when the iteration cap was hit; `curve` is then the best iterate.
    pub converged: bool,
    pub iterations: usize,
    /// `sum w (loss - predict(size))^2`
    pub weighted_residual: f64,
    /// `sqrt(residual / weighted total sum of squares)`; 0 for a perfect fit.
    pub residual_to_signal: f64,
}

pub fn weighted_residual(points: &[CurvePoint], curve: &PowerLawCurve) -> f64 {
    points
        .iter()
        .map(|p| {
            let r = p.loss - curve.predict(p.size);
            p.weight * r * r
        })
        .sum()
}

fn validate(points: &[CurvePoint], n_params: usize) -> Result<()> {
    for p in points {
        if !(p.size.is_finite() && p.size > 0.0) {
            return Err(Error::invalid(format!("point size must be positive, got {}", p.size)));
        }
        if !(p.loss.is_finite() && p.loss >= 0.0) {
            return Err(Error::invalid(format!("point loss must be nonnegative, got {}", p.loss)));
        }
        if !(p.weight.is_finite() && p.weight > 0.0) {
            return Err(Error::invalid(format!("point weight must be positive, got {}", p.weight)));
        }
    }
    let mut sizes: Vec<f64> = points.iter().map(|p| p.size).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    if sizes.len() < n_params {
        return Err(Error::InsufficientData { needed: n_params, got: sizes.len() });
    }
    if points.iter().all(|p| p.loss == 0.0) {
        return Err(Error::DegenerateFit("all observed losses are zero".into()));
    }
    Ok(())
}

/// Weighted least squares on `(ln size, ln loss)`, then the exact best scale
/// for that exponent.
fn initial_guess(points: &[CurvePoint]) -> (f64, f64) {
    let logs: Vec<(f64, f64, f64)> =
        points.iter().filter(|p| p.loss > 0.0).map(|p| (p.size.ln(), p.loss.ln(), p.weight)).collect();
    let sw: f64 = logs.iter().map(|t| t.2).sum();
    let mx = logs.iter().map(|t| t.2 * t.0).sum::<f64>() / sw;
    let my = logs.iter().map(|t| t.2 * t.1).sum::<f64>() / sw;
    let sxx: f64 = logs.iter().map(|t| t.2 * (t.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|t| t.2 * (t.0 - mx) * (t.1 - my)).sum();
    let a = if sxx > 0.0 { -sxy / sxx } else { 0.5 };
    let a = if a.is_finite() && a > 1e-3 { a } else { 0.5 };
    let num: f64 = points.iter().map(|p| p.weight * p.loss * p.size.powf(-a)).sum();
    let den: f64 = points.iter().map(|p| p.weight * p.size.powf(-2.0 * a)).sum();
    let b = if num > 0.0 && den > 0.0 { num / den } else { my.exp() };
    (a, b)
}

struct Params {
    values: Vec<f64>,
}

impl Params {
    fn curve(&self) -> PowerLawCurve {
        PowerLawCurve { a: self.values[0], b: self.values[1].exp(), c: self.values.get(2).copied().unwrap_or(0.0) }
    }

    fn project(&mut self) {
        self.values[0] = self.values[0].max(FLAT_EXPONENT);
        if let Some(c) = self.values.get_mut(2) {
            *c = c.max(0.0);
        }
    }
}

/// Fits `loss = b * size^(-a) [+ c]` by minimizing the weighted squared
/// residual. Needs at least as many distinct sizes as parameters.
pub fn fit_power_law(points: &[CurvePoint], fit_floor: bool) -> Result<CurveFit> {
    let n_params = if fit_floor { 3 } else { 2 };
    validate(points, n_params)?;

    let (a0, b0) = initial_guess(points);
    let mut params = Params { values: vec![a0, b0.ln()] };
    if fit_floor {
        params.values.push(0.0);
    }
    let mut best = weighted_residual(points, &params.curve());
    let mut damping = INITIAL_DAMPING;
    let mut converged = false;
    let mut iterations = 0;

    let m = points.len();
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let curve = params.curve();
        let mut jac = DMatrix::<f64>::zeros(m, n_params);
        let mut resid = DVector::<f64>::zeros(m);
        for (k, p) in points.iter().enumerate() {
            let power = curve.b * p.size.powf(-curve.a);
            let sw = p.weight.sqrt();
            resid[k] = sw * (p.loss - power - curve.c);
            jac[(k, 0)] = -sw * p.size.ln() * power;
            jac[(k, 1)] = sw * power;
            if fit_floor {
                jac[(k, 2)] = sw;
            }
        }
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let gradient = &jt * &resid;

        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let mut lhs = normal.clone();
            for i in 0..n_params {
                lhs[(i, i)] += damping * normal[(i, i)].max(1e-12);
            }
            let Some(step) = lhs.lu().solve(&gradient) else {
                damping *= 10.0;
                continue;
            };
            let mut trial = Params { values: params.values.iter().zip(step.iter()).map(|(v, s)| v + s).collect() };
            trial.project();
            let trial_residual = weighted_residual(points, &trial.curve());
            if trial_residual.is_finite() && trial_residual < best {
                let change: f64 =
                    trial.values.iter().zip(&params.values).map(|(t, v)| (t - v).powi(2)).sum::<f64>().sqrt();
                let scale: f64 = params.values.iter().map(|v| v * v).sum::<f64>().sqrt();
                params = trial;
                best = trial_residual;
                damping = (damping / 10.0).max(1e-12);
                accepted = true;
                if change <= PARAM_TOL * (scale + PARAM_TOL) {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        // No descent step left at any damping: stationary.
        if !accepted {
            converged = true;
        }
        if converged {
            break;
        }
    }

    let curve = params.curve();
    let sw: f64 = points.iter().map(|p| p.weight).sum();
    let mean = points.iter().map(|p| p.weight * p.loss).sum::<f64>() / sw;
    let total: f64 = points.iter().map(|p| p.weight * (p.loss - mean).powi(2)).sum();
    let residual_to_signal = if best <= f64::EPSILON * total.max(f64::MIN_POSITIVE) {
        0.0
    } else if total > 0.0 {
        (best / total).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(CurveFit { curve, converged, iterations, weighted_residual: best, residual_to_signal })
}
