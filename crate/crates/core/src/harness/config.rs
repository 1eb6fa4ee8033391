//! Experiment configuration, read from TOML.
//!
//! ```toml
//! schema_version = "1"
//! name = "basic"
//! methods = ["uniform", "water_filling", "moderate"]
//! budget = 4500
//! lambda = 1.0
//! num_trials = 10
//! seed = 7
//!
//! [[slices]]
//! id = "s0"
//! size = 300
//! cost = 1.0          # or avg_time = 82.1
//!
//! [oracle.synthetic]
//! a = [0.5]
//! b = [3.0]
//! noise_sigma = 0.01
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{IterativeConfig, LimitStrategy};
use crate::curves::{CurveEstimationConfig, PowerLawCurve};
use crate::error::{Error, Result};
use crate::model::{normalize_costs, SlicePartition, SliceState};
use crate::oracle::{SyntheticWorld, TrainerEndpoint, DEFAULT_KAPPA_MAX};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Original,
    Uniform,
    WaterFilling,
    OneShot,
    Conservative,
    Moderate,
    Aggressive,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Original,
        Method::Uniform,
        Method::WaterFilling,
        Method::OneShot,
        Method::Conservative,
        Method::Moderate,
        Method::Aggressive,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Original => "original",
            Method::Uniform => "uniform",
            Method::WaterFilling => "water_filling",
            Method::OneShot => "one_shot",
            Method::Conservative => "conservative",
            Method::Moderate => "moderate",
            Method::Aggressive => "aggressive",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub id: String,
    pub size: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    /// Average seconds to acquire one example; costs are normalized from these.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_size: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub kappa: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_kappa_max")]
    pub kappa_max: f64,
    #[serde(default)]
    pub pool_limit: Option<Vec<u64>>,
}

fn default_kappa_max() -> f64 {
    DEFAULT_KAPPA_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSection {
    Synthetic(SyntheticSpec),
    /// `{seed}` in any command argument is replaced by the trial seed.
    Trainer(TrainerEndpoint),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesSection {
    pub num_subsets: usize,
    pub num_repeats: usize,
    pub min_fraction: f64,
    pub fit_floor: bool,
}

impl Default for CurvesSection {
    fn default() -> Self {
        let d = CurveEstimationConfig::default();
        Self {
            num_subsets: d.num_subsets,
            num_repeats: d.num_repeats,
            min_fraction: d.min_fraction,
            fit_floor: d.fit_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterativeSection {
    pub min_slice_size: u64,
    pub initial_limit: f64,
    pub moderate_step: f64,
    pub aggressive_factor: f64,
    pub max_iterations: usize,
}

impl Default for IterativeSection {
    fn default() -> Self {
        let d = IterativeConfig::default();
        Self {
            min_slice_size: d.min_slice_size,
            initial_limit: d.initial_limit,
            moderate_step: 1.0,
            aggressive_factor: 2.0,
            max_iterations: d.max_iterations,
        }
    }
}

fn default_schema() -> String {
    SCHEMA_VERSION.to_string()
}

fn default_trials() -> usize {
    10
}

fn default_validation_size() -> u64 {
    500
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: String,
    pub name: String,
    pub methods: Vec<Method>,
    pub budget: f64,
    /// Optional budget sweep; replaces `budget` when present.
    #[serde(default)]
    pub budgets: Option<Vec<f64>>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_trials")]
    pub num_trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_validation_size")]
    pub validation_size: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub slices: Vec<SliceSpec>,
    pub oracle: OracleSection,
    #[serde(default)]
    pub curves: CurvesSection,
    #[serde(default)]
    pub iterative: IterativeSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {:?}", self.schema_version));
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.num_trials < 1 {
            return bad("num_trials must be at least 1".into());
        }
        for b in self.budget_list() {
            if !(b.is_finite() && b >= 0.0) {
                return bad(format!("budget must be nonnegative, got {b}"));
            }
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        for s in &self.slices {
            if s.cost.is_some() == s.avg_time.is_some() {
                return bad(format!("slice {}: give exactly one of cost or avg_time", s.id));
            }
        }
        if self.slices.iter().any(|s| s.cost.is_some()) && self.slices.iter().any(|s| s.avg_time.is_some()) {
            return bad("mixing cost and avg_time across slices is not supported".into());
        }
        self.partition().map_err(|e| Error::Config(e.to_string()))?;
        self.curve_config(0).validate().map_err(|e| Error::Config(e.to_string()))?;
        self.iterative_config(LimitStrategy::Conservative).validate().map_err(|e| Error::Config(e.to_string()))?;
        LimitStrategy::Moderate(self.iterative.moderate_step).validate().map_err(|e| Error::Config(e.to_string()))?;
        LimitStrategy::Aggressive(self.iterative.aggressive_factor)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        match &self.oracle {
            OracleSection::Synthetic(_) => {
                self.synthetic_world(0)?;
            }
            OracleSection::Trainer(t) => t.validate()?,
        }
        Ok(())
    }

    pub fn budget_list(&self) -> Vec<f64> {
        self.budgets.clone().unwrap_or_else(|| vec![self.budget])
    }

    pub fn partition(&self) -> Result<SlicePartition> {
        let costs: Vec<f64> = if self.slices.iter().all(|s| s.avg_time.is_some()) && !self.slices.is_empty() {
            normalize_costs(&self.slices.iter().map(|s| s.avg_time.unwrap_or(0.0)).collect::<Vec<_>>())?
        } else {
            self.slices.iter().map(|s| s.cost.unwrap_or(f64::NAN)).collect()
        };
        let slices = self
            .slices
            .iter()
            .zip(costs)
            .map(|(s, c)| SliceState::new(s.id.clone(), s.size, c, s.validation_size.unwrap_or(self.validation_size)))
            .collect::<Result<Vec<_>>>()?;
        SlicePartition::new(slices)
    }

    pub fn curve_config(&self, seed: u64) -> CurveEstimationConfig {
        CurveEstimationConfig {
            num_subsets: self.curves.num_subsets,
            num_repeats: self.curves.num_repeats,
            min_fraction: self.curves.min_fraction,
            seed,
            fit_floor: self.curves.fit_floor,
            ..Default::default()
        }
    }

    pub fn iterative_config(&self, strategy: LimitStrategy) -> IterativeConfig {
        IterativeConfig {
            min_slice_size: self.iterative.min_slice_size,
            initial_limit: self.iterative.initial_limit,
            strategy,
            lambda: self.lambda,
            max_iterations: self.iterative.max_iterations,
        }
    }

    pub fn strategy(&self, method: Method) -> Option<LimitStrategy> {
        match method {
            Method::Conservative => Some(LimitStrategy::Conservative),
            Method::Moderate => Some(LimitStrategy::Moderate(self.iterative.moderate_step)),
            Method::Aggressive => Some(LimitStrategy::Aggressive(self.iterative.aggressive_factor)),
            _ => None,
        }
    }

    /// Fresh synthetic world for one trial.
    pub fn synthetic_world(&self, seed: u64) -> Result<SyntheticWorld> {
        let OracleSection::Synthetic(spec) = &self.oracle else {
            return Err(Error::Config("oracle is not synthetic".into()));
        };
        let n = self.slices.len();
        let c = spec.c.clone().unwrap_or_else(|| vec![0.0; n]);
        if spec.a.len() != n || spec.b.len() != n || c.len() != n {
            return Err(Error::Config(format!("synthetic curve parameters need {n} entries each")));
        }
        let truth = spec
            .a
            .iter()
            .zip(&spec.b)
            .zip(&c)
            .map(|((&a, &b), &c)| PowerLawCurve::new(a, b, c))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(e.to_string()))?;
        let mut builder = SyntheticWorld::builder(
            self.slices.iter().map(|s| s.id.clone()).collect(),
            truth,
            self.slices.iter().map(|s| s.size).collect(),
        )
        .noise_sigma(spec.noise_sigma)
        .seed(seed)
        .kappa_max(spec.kappa_max);
        if let Some(k) = &spec.kappa {
            builder = builder.kappa(k.clone());
        }
        if let Some(p) = &spec.pool_limit {
            builder = builder.pool_limit(p.clone());
        }
        builder.build().map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
schema_version = "1"
name = "basic"
methods = ["original", "uniform", "moderate"]
budget = 100
seed = 3

[[slices]]
id = "a"
size = 50
cost = 1.0

[[slices]]
id = "b"
size = 80
cost = 2.0

[oracle.synthetic]
a = [0.5, 0.4]
b = [3.0, 2.0]
noise_sigma = 0.01
"#;

    #[test]
    fn parses_and_defaults() {
        let cfg = ExperimentConfig::from_toml_str(BASIC).unwrap();
        assert_eq!(cfg.num_trials, 10);
        assert_eq!(cfg.validation_size, 500);
        assert_eq!(cfg.curves.num_subsets, 10);
        assert_eq!(cfg.methods, vec![Method::Original, Method::Uniform, Method::Moderate]);
        let p = cfg.partition().unwrap();
        assert_eq!(p.costs(), vec![1.0, 2.0]);
        let round = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn avg_times_become_costs() {
        let text = BASIC.replace("cost = 1.0", "avg_time = 67.6").replace("cost = 2.0", "avg_time = 104.6");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.partition().unwrap().costs(), vec![1.0, 1.5]);
    }

    #[test]
    fn rejects_bad_configs() {
        for broken in [
            BASIC.replace("methods = [\"original\", \"uniform\", \"moderate\"]", "methods = []"),
            BASIC.replace("schema_version = \"1\"", "schema_version = \"2\""),
            BASIC.replace("a = [0.5, 0.4]", "a = [0.5]"),
            BASIC.replace("budget = 100", "budget = -1"),
            BASIC.replace("seed = 3", "seed = 3\nnum_trials = 0"),
            BASIC.replace("seed = 3", "seed = 3\nunknown_key = 1"),
            BASIC.replace("\"moderate\"", "\"best\""),
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(&broken), Err(Error::Config(_))), "{broken}");
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.as_str()), Some(m));
        }
    }
}
