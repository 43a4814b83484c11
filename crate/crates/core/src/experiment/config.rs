//! Experiment configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::attacks::{AttackConfig, AttackGoal, OracleConfig};
use crate::bound::{CertifyConfig, EnhanceConfig};
use crate::datasets::{DatasetSource, DatasetSpec};
use crate::error::{Error, Result};
use crate::gp::{OptimizerConfig, DEFAULT_LAPLACE_MAX_ITER, DEFAULT_LAPLACE_TOL};
use crate::lr::{DEFAULT_LR_MAX_ITER, DEFAULT_LR_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds the dataset split and the random-search oracle.
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub model: ModelConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub joint: Option<JointConfig>,
    #[serde(default)]
    pub attack: Option<AttackSection>,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Gpc(GpcConfig),
    Lr(LrConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpcConfig {
    pub variance: f64,
    #[serde(deserialize_with = "isotropic")]
    pub lengthscale: f64,
    /// Regression noise `sigma^2` used when turning the Laplace mode into
    /// weights.
    #[serde(default = "default_noise_variance")]
    pub noise_variance: f64,
    /// Number of inducing points; absent means the full model.
    #[serde(default)]
    pub inducing: Option<usize>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_laplace_tol")]
    pub laplace_tol: f64,
    #[serde(default = "default_laplace_max_iter")]
    pub laplace_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrConfig {
    pub c: f64,
    #[serde(default = "default_lr_tol")]
    pub tol: f64,
    #[serde(default = "default_lr_max_iter")]
    pub max_iter: usize,
}

fn default_noise_variance() -> f64 {
    0.01
}

fn default_laplace_tol() -> f64 {
    DEFAULT_LAPLACE_TOL
}
fn default_laplace_max_iter() -> usize {
    DEFAULT_LAPLACE_MAX_ITER
}
fn default_lr_tol() -> f64 {
    DEFAULT_LR_TOL
}
fn default_lr_max_iter() -> usize {
    DEFAULT_LR_MAX_ITER
}

fn isotropic<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        One(f64),
        Many(Vec<f64>),
    }
    match Raw::deserialize(de)? {
        Raw::One(l) => Ok(l),
        Raw::Many(v) if v.len() == 1 => Ok(v[0]),
        Raw::Many(_) => Err(serde::de::Error::custom(
            "anisotropic lengthscales are not supported; give a single lengthscale",
        )),
    }
}

/// Joint bounds for pairs among the highest-ranked dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointConfig {
    pub top_dims: usize,
    /// Slices per axis; defaults to the certify slices.
    pub slices: Option<usize>,
    /// Refinement of the largest leg combinations.
    pub enhance: Option<EnhanceConfig>,
}

impl Default for JointConfig {
    fn default() -> Self {
        JointConfig {
            top_dims: 3,
            slices: None,
            enhance: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub max_inputs: usize,
    pub line_resolution: usize,
    pub goal: AttackGoal,
    /// Attack at most this many confident test points, in test order.
    pub max_points: Option<usize>,
}

impl Default for AttackSection {
    fn default() -> Self {
        let a = AttackConfig::default();
        AttackSection {
            max_inputs: a.max_inputs,
            line_resolution: a.line_resolution,
            goal: a.goal,
            max_points: None,
        }
    }
}

impl AttackSection {
    pub fn attack_config(&self) -> AttackConfig {
        AttackConfig {
            max_inputs: self.max_inputs,
            line_resolution: self.line_resolution,
            goal: self.goal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    /// Random-search trials; 0 skips the random search.
    pub trials: u64,
    /// Inputs changed together in each random trial.
    pub n_dims: usize,
    pub parallel: bool,
    pub grid: OracleConfig,
    /// Input sets (one or two inputs each) for the grid oracle.
    pub grid_dims: Vec<Vec<usize>>,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            trials: 1_000_000,
            n_dims: 1,
            parallel: false,
            grid: OracleConfig::default(),
            grid_dims: Vec::new(),
        }
    }
}

/// Value lists swept as a Cartesian product. Empty lists are not swept.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub slices: Vec<usize>,
    pub inducing: Vec<usize>,
    pub lengthscale: Vec<f64>,
    pub variance: Vec<f64>,
    pub c: Vec<f64>,
}

/// The dataset table flattens its source, so serde cannot reject unknown
/// keys there itself.
fn check_dataset_keys(raw: &toml::Table, spec: &DatasetSpec) -> Result<()> {
    let Some(toml::Value::Table(given)) = raw.get("dataset") else { return Ok(()) };
    let known = toml::Table::try_from(spec).map_err(|e| Error::Config(e.to_string()))?;
    match given.keys().find(|k| !known.contains_key(*k) && k.as_str() != "filter_threshold") {
        Some(k) => Err(Error::Config(format!("unknown dataset key `{k}`"))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg: ExperimentConfig = raw.clone().try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        check_dataset_keys(&raw, &cfg.dataset)?;
        cfg.resolve_paths(base_dir);
        cfg.dataset.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths are taken from the file's
    /// directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset.source {
            DatasetSource::Mnist { images, labels, .. } => {
                fix(images);
                fix(labels);
            }
            DatasetSource::Uci { path, .. } => fix(path),
            _ => {}
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.dataset.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dataset.n_train == 0 || self.dataset.n_test == 0 {
            return bad("dataset.n_train and dataset.n_test must be at least 1".into());
        }
        match &self.model {
            ModelConfig::Gpc(g) => {
                if !(g.variance > 0.0 && g.lengthscale > 0.0 && g.noise_variance >= 0.0) {
                    return bad("model needs variance > 0, lengthscale > 0, noise_variance >= 0".into());
                }
                if g.inducing == Some(0) {
                    return bad("model.inducing must be at least 1".into());
                }
            }
            ModelConfig::Lr(l) => {
                if !(l.c > 0.0) {
                    return bad("model.c must be positive".into());
                }
                if self.attack.is_some() || self.oracle.is_some() || self.joint.is_some() {
                    return bad("attack, oracle and joint sections need a gpc model".into());
                }
            }
        }
        if self.certify.slices == 0 {
            return bad("certify.slices must be at least 1".into());
        }
        if let Some(o) = &self.oracle {
            if o.trials > 0 && o.n_dims == 0 {
                return bad("oracle.n_dims must be at least 1".into());
            }
            if o.grid_dims.iter().any(|d| d.is_empty() || d.len() > 2) {
                return bad("oracle.grid_dims entries need one or two inputs".into());
            }
        }
        let s = &self.sweep;
        if s.slices.contains(&0) || s.inducing.contains(&0) {
            return bad("sweep values must be positive".into());
        }
        if s.lengthscale.iter().chain(&s.variance).chain(&s.c).any(|v| !(*v > 0.0)) {
            return bad("sweep values must be positive".into());
        }
        let gpc_only = !(s.inducing.is_empty() && s.lengthscale.is_empty() && s.variance.is_empty());
        match self.model {
            ModelConfig::Lr(_) if gpc_only => bad("inducing, lengthscale and variance sweeps need a gpc model".into()),
            ModelConfig::Gpc(_) if !s.c.is_empty() => bad("a c sweep needs an lr model".into()),
            _ => Ok(()),
        }
    }

    /// Every combination of the sweep lists, in a fixed order. No lists
    /// means no points.
    pub fn sweep_points(&self) -> Vec<BTreeMap<String, f64>> {
        let s = &self.sweep;
        let axes: Vec<(&str, Vec<f64>)> = [
            ("slices", s.slices.iter().map(|&v| v as f64).collect::<Vec<_>>()),
            ("inducing", s.inducing.iter().map(|&v| v as f64).collect()),
            ("lengthscale", s.lengthscale.clone()),
            ("variance", s.variance.clone()),
            ("c", s.c.clone()),
        ]
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .collect();
        if axes.is_empty() {
            return Vec::new();
        }
        let mut points = vec![BTreeMap::new()];
        for (name, values) in axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.insert(name.to_string(), v);
                        q
                    })
                })
                .collect();
        }
        points
    }

    /// This config with one sweep point applied and the sweep removed.
    pub fn at_point(&self, point: &BTreeMap<String, f64>) -> Self {
        let mut c = self.clone();
        c.sweep = SweepConfig::default();
        for (k, &v) in point {
            match (k.as_str(), &mut c.model) {
                ("slices", _) => c.certify.slices = v as usize,
                ("inducing", ModelConfig::Gpc(g)) => g.inducing = Some(v as usize),
                ("lengthscale", ModelConfig::Gpc(g)) => g.lengthscale = v,
                ("variance", ModelConfig::Gpc(g)) => g.variance = v,
                ("c", ModelConfig::Lr(l)) => l.c = v,
                _ => {}
            }
        }
        c
    }
}
