//! Loss oracles: anything that maps per-slice training sizes to per-slice
//! validation losses.

mod protocol;
mod synthetic;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::OracleError;

pub use protocol::{Message, PROTOCOL_VERSION};
pub use synthetic::{SyntheticOracle, SyntheticWorld, DEFAULT_KAPPA_MAX};
pub use trainer::{TrainerEndpoint, TrainerOracle};

/// Training-set sizes for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QuerySizes {
    /// Fraction of each slice's current training set.
    Fractions(Vec<f64>),
    /// Absolute per-slice sizes.
    Sizes(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub sizes: QuerySizes,
    /// Seeds subset sampling and training inside the oracle.
    pub seed: u64,
}

impl EvalQuery {
    pub fn fractions(fractions: Vec<f64>, seed: u64) -> Self {
        Self { sizes: QuerySizes::Fractions(fractions), seed }
    }

    pub fn sizes(sizes: Vec<u64>, seed: u64) -> Self {
        Self { sizes: QuerySizes::Sizes(sizes), seed }
    }

    /// Evaluates the full current training sets.
    pub fn full(num_slices: usize, seed: u64) -> Self {
        Self::fractions(vec![1.0; num_slices], seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OracleCapabilities {
    /// Evaluations may run concurrently.
    pub reentrant: bool,
    /// Acquisition changes the oracle's world.
    pub stateful: bool,
}

/// Result of an acquisition request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acquisition {
    pub realized: Vec<u64>,
    /// Set when some slice's pool could not cover the request.
    pub pool_limited: bool,
}

pub trait LossOracle {
    fn num_slices(&self) -> usize;

    fn capabilities(&self) -> OracleCapabilities;

    fn evaluate(&mut self, query: &EvalQuery) -> Result<Vec<f64>, OracleError>;

    /// Adds `counts[i]` new examples to slice `i`.
    fn acquire(&mut self, counts: &[u64]) -> Result<Acquisition, OracleError>;
}

impl<O: LossOracle + ?Sized> LossOracle for &mut O {
    fn num_slices(&self) -> usize {
        (**self).num_slices()
    }

    fn capabilities(&self) -> OracleCapabilities {
        (**self).capabilities()
    }

    fn evaluate(&mut self, query: &EvalQuery) -> Result<Vec<f64>, OracleError> {
        (**self).evaluate(query)
    }

    fn acquire(&mut self, counts: &[u64]) -> Result<Acquisition, OracleError> {
        (**self).acquire(counts)
    }
}

/// Counts evaluation queries passed through to an inner oracle.
#[derive(Debug)]
pub struct CountingOracle<O> {
    inner: O,
    evaluations: usize,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, evaluations: 0 }
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn reset(&mut self) {
        self.evaluations = 0;
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: LossOracle> LossOracle for CountingOracle<O> {
    fn num_slices(&self) -> usize {
        self.inner.num_slices()
    }

    fn capabilities(&self) -> OracleCapabilities {
        self.inner.capabilities()
    }

    fn evaluate(&mut self, query: &EvalQuery) -> Result<Vec<f64>, OracleError> {
        self.evaluations += 1;
        self.inner.evaluate(query)
    }

    fn acquire(&mut self, counts: &[u64]) -> Result<Acquisition, OracleError> {
        self.inner.acquire(counts)
    }
}

/// Examples kept when a slice of `size` is shrunk to `fraction`; at least 1.
pub fn subset_size(size: u64, fraction: f64) -> u64 {
    ((size as f64 * fraction).round() as u64).clamp(1, size.max(1))
}

pub(crate) fn check_len<T>(what: &str, values: &[T], n: usize) -> Result<(), OracleError> {
    if values.len() != n {
        return Err(OracleError::Shape(format!("{what}: expected {n} entries, got {}", values.len())));
    }
    Ok(())
}
