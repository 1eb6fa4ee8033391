//! Seeded synthetic world with slice influence.
//!
//! Slice `j` at training sizes `s` has loss
//! `b_j * s_j^(-a_j) + c_j + (sum_l kappa[j][l]) * dIR(s) + noise`,
//! where `dIR` is the imbalance ratio of `s` minus the imbalance ratio of the
//! reference sizes fixed at construction. Noise is Gaussian, seeded by the
//! world seed mixed with the query seed, and the result is clipped at 0.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_len, subset_size, Acquisition, EvalQuery, LossOracle, OracleCapabilities, QuerySizes};
use crate::curves::PowerLawCurve;
use crate::error::{Error, OracleError, Result};
use crate::seed;

pub const DEFAULT_KAPPA_MAX: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    ids: Vec<String>,
    truth: Vec<PowerLawCurve>,
    kappa: Vec<Vec<f64>>,
    noise_sigma: f64,
    seed: u64,
    reference_sizes: Vec<u64>,
    /// Maximum number of examples that can ever be acquired per slice.
    pool_limit: Option<Vec<u64>>,
}

pub struct SyntheticWorldBuilder {
    ids: Vec<String>,
    truth: Vec<PowerLawCurve>,
    kappa: Option<Vec<Vec<f64>>>,
    noise_sigma: f64,
    seed: u64,
    reference_sizes: Vec<u64>,
    pool_limit: Option<Vec<u64>>,
    kappa_max: f64,
}

impl SyntheticWorldBuilder {
    pub fn kappa(mut self, kappa: Vec<Vec<f64>>) -> Self {
        self.kappa = Some(kappa);
        self
    }

    pub fn noise_sigma(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn pool_limit(mut self, limit: Vec<u64>) -> Self {
        self.pool_limit = Some(limit);
        self
    }

    pub fn kappa_max(mut self, kappa_max: f64) -> Self {
        self.kappa_max = kappa_max;
        self
    }

    pub fn build(self) -> Result<SyntheticWorld> {
        let n = self.ids.len();
        if n == 0 {
            return Err(Error::invalid("synthetic world needs at least one slice"));
        }
        if self.truth.len() != n || self.reference_sizes.len() != n {
            return Err(Error::invalid("ids, curves and reference sizes must have equal length"));
        }
        for c in &self.truth {
            c.validate()?;
        }
        if self.reference_sizes.contains(&0) {
            return Err(Error::invalid("reference sizes must be positive"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be nonnegative"));
        }
        let kappa = self.kappa.unwrap_or_else(|| vec![vec![0.0; n]; n]);
        if kappa.len() != n || kappa.iter().any(|row| row.len() != n) {
            return Err(Error::invalid(format!("influence matrix must be {n}x{n}")));
        }
        for (j, row) in kappa.iter().enumerate() {
            if row[j] != 0.0 {
                return Err(Error::invalid("influence matrix diagonal must be zero"));
            }
            if let Some(k) = row.iter().find(|k| !(k.is_finite() && k.abs() <= self.kappa_max)) {
                return Err(Error::invalid(format!("influence {k} exceeds the configured maximum {}", self.kappa_max)));
            }
        }
        if let Some(limit) = &self.pool_limit {
            if limit.len() != n {
                return Err(Error::invalid("pool_limit must have one entry per slice"));
            }
        }
        Ok(SyntheticWorld {
            ids: self.ids,
            truth: self.truth,
            kappa,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
            reference_sizes: self.reference_sizes,
            pool_limit: self.pool_limit,
        })
    }
}

fn imbalance(sizes: &[u64]) -> f64 {
    let max = sizes.iter().copied().max().unwrap_or(1) as f64;
    let min = sizes.iter().copied().min().unwrap_or(1) as f64;
    max / min
}

impl SyntheticWorld {
    pub fn builder(ids: Vec<String>, truth: Vec<PowerLawCurve>, reference_sizes: Vec<u64>) -> SyntheticWorldBuilder {
        SyntheticWorldBuilder {
            ids,
            truth,
            kappa: None,
            noise_sigma: 0.0,
            seed: 0,
            reference_sizes,
            pool_limit: None,
            kappa_max: DEFAULT_KAPPA_MAX,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn truth(&self) -> &[PowerLawCurve] {
        &self.truth
    }

    pub fn reference_sizes(&self) -> &[u64] {
        &self.reference_sizes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same world, different noise seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Largest size slice `j` can reach.
    pub fn max_size(&self, j: usize) -> Option<u64> {
        self.pool_limit.as_ref().map(|l| self.reference_sizes[j] + l[j])
    }

    /// Short hex digest of the world's parameters and seed.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("world serializes");
        let hash = Sha256::digest(&json);
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Noise-free loss with influence, before clipping.
    pub fn mean_loss(&self, sizes: &[u64]) -> Vec<f64> {
        let d_ir = imbalance(sizes) - imbalance(&self.reference_sizes);
        self.truth
            .iter()
            .zip(&self.kappa)
            .zip(sizes)
            .map(|((curve, row), &s)| curve.predict(s as f64) + row.iter().sum::<f64>() * d_ir)
            .collect()
    }

    pub fn eval(&self, sizes: &[u64], query_seed: u64) -> Result<Vec<f64>, OracleError> {
        check_len("sizes", sizes, self.len())?;
        for (j, &s) in sizes.iter().enumerate() {
            if s == 0 {
                return Err(OracleError::Shape(format!("slice {} has size 0", self.ids[j])));
            }
            if let Some(max) = self.max_size(j) {
                if s > max {
                    return Err(OracleError::PoolExhausted { slice: self.ids[j].clone(), requested: s, limit: max });
                }
            }
        }
        let mut losses = self.mean_loss(sizes);
        if self.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.noise_sigma).expect("sigma validated");
            let mut rng = seed::rng(seed::mix(self.seed, query_seed));
            for l in &mut losses {
                *l += normal.sample(&mut rng);
            }
        }
        for l in &mut losses {
            *l = l.max(0.0);
        }
        Ok(losses)
    }
}

/// A [`SyntheticWorld`] together with its current training sizes.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    world: SyntheticWorld,
    sizes: Vec<u64>,
}

impl SyntheticOracle {
    /// Starts at the world's reference sizes.
    pub fn new(world: SyntheticWorld) -> Self {
        let sizes = world.reference_sizes.clone();
        Self { world, sizes }
    }

    pub fn world(&self) -> &SyntheticWorld {
        &self.world
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn resolve(&self, query: &QuerySizes) -> Result<Vec<u64>, OracleError> {
        match query {
            QuerySizes::Fractions(f) => {
                check_len("fractions", f, self.sizes.len())?;
                if let Some(bad) = f.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
                    return Err(OracleError::Shape(format!("fraction {bad} outside (0, 1]")));
                }
                Ok(self.sizes.iter().zip(f).map(|(&s, &x)| subset_size(s, x)).collect())
            }
            QuerySizes::Sizes(s) => {
                check_len("sizes", s, self.sizes.len())?;
                Ok(s.clone())
            }
        }
    }
}

impl LossOracle for SyntheticOracle {
    fn num_slices(&self) -> usize {
        self.world.len()
    }

    fn capabilities(&self) -> OracleCapabilities {
        OracleCapabilities { reentrant: true, stateful: true }
    }

    fn evaluate(&mut self, query: &EvalQuery) -> Result<Vec<f64>, OracleError> {
        let sizes = self.resolve(&query.sizes)?;
        self.world.eval(&sizes, query.seed)
    }

    fn acquire(&mut self, counts: &[u64]) -> Result<Acquisition, OracleError> {
        check_len("counts", counts, self.sizes.len())?;
        let mut pool_limited = false;
        let mut realized = Vec::with_capacity(counts.len());
        for (j, &want) in counts.iter().enumerate() {
            let room = self.world.max_size(j).map_or(u64::MAX, |m| m.saturating_sub(self.sizes[j]));
            let got = want.min(room);
            pool_limited |= got < want;
            self.sizes[j] += got;
            realized.push(got);
        }
        Ok(Acquisition { realized, pool_limited })
    }
}
