//! Learning curves: power-law models of slice loss versus slice size.

mod estimate;
mod fit;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use estimate::{estimate_curves, write_observations_csv, Observation, SliceCurve};
pub use fit::{fit_power_law, weighted_residual, CurveFit};

/// Exponent used for the flat fallback curve of a slice that could not be fit.
pub const FLAT_EXPONENT: f64 = 1e-6;

/// `loss(x) = b * x^(-a) + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawCurve {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub c: f64,
}

impl PowerLawCurve {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let curve = Self { a, b, c };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::invalid(format!("curve exponent must be positive, got {}", self.a)));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::invalid(format!("curve scale must be positive, got {}", self.b)));
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::invalid(format!("curve floor must be nonnegative, got {}", self.c)));
        }
        Ok(())
    }

    pub fn predict(&self, size: f64) -> f64 {
        self.b * size.powf(-self.a) + self.c
    }

    /// d/dx of [`predict`](Self::predict).
    pub fn slope(&self, size: f64) -> f64 {
        -self.a * self.b * size.powf(-self.a - 1.0)
    }
}

/// One (size, loss) observation used for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: f64,
    pub loss: f64,
    pub weight: f64,
}

impl CurvePoint {
    /// A point weighted by its subset size.
    pub fn sized(size: u64, loss: f64) -> Self {
        Self { size: size as f64, loss, weight: size as f64 }
    }
}

#[derive(Deserialize)]
struct PointRow {
    size: f64,
    loss: f64,
    weight: Option<f64>,
}

/// Reads `size,loss[,weight]` rows; a missing weight defaults to the size.
pub fn read_points_csv(path: &std::path::Path) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize::<PointRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::csv(path, e))?;
            Ok(CurvePoint { size: row.size, loss: row.loss, weight: row.weight.unwrap_or(row.size) })
        })
        .collect()
}

/// How subset models are trained when estimating curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMode {
    /// Every query shrinks all slices to the same fraction at once; one
    /// trained model yields a point for every slice.
    #[default]
    Amortized,
    /// One slice is shrunk at a time while the others stay whole.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveEstimationConfig {
    pub num_subsets: usize,
    pub num_repeats: usize,
    pub min_fraction: f64,
    pub seed: u64,
    pub fit_floor: bool,
    pub mode: EstimationMode,
}

impl Default for CurveEstimationConfig {
    fn default() -> Self {
        Self {
            num_subsets: 10,
            num_repeats: 5,
            min_fraction: 0.1,
            seed: 0,
            fit_floor: false,
            mode: EstimationMode::Amortized,
        }
    }
}

impl CurveEstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_subsets < 2 {
            return Err(Error::invalid("num_subsets must be at least 2"));
        }
        if self.num_repeats < 1 {
            return Err(Error::invalid("num_repeats must be at least 1"));
        }
        if !(self.min_fraction > 0.0 && self.min_fraction < 1.0) {
            return Err(Error::invalid(format!("min_fraction must lie in (0, 1), got {}", self.min_fraction)));
        }
        Ok(())
    }

    /// Oracle queries issued by one estimation over `num_slices` slices.
    pub fn queries_per_estimate(&self, num_slices: usize) -> usize {
        let base = self.num_subsets * self.num_repeats;
        match self.mode {
            EstimationMode::Amortized => base,
            EstimationMode::Exhaustive => base * num_slices,
        }
    }
}

/// `num_subsets` evenly spaced fractions from `min_fraction` to 1.0, ascending.
pub fn subset_schedule(config: &CurveEstimationConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let k = config.num_subsets;
    let step = (1.0 - config.min_fraction) / (k - 1) as f64;
    let mut fractions: Vec<f64> = (0..k).map(|i| config.min_fraction + step * i as f64).collect();
    fractions[k - 1] = 1.0;
    Ok(fractions)
}
