//! Result records, one JSON object per line.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentConfig;
use crate::bound::MinInputs;
use crate::datasets::LoadedDataset;
use crate::error::{Error, Result};
use crate::gp::ThresholdPair;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub fingerprint: String,
    pub n_train: usize,
    pub n_test: usize,
    pub raw_dims: usize,
    /// Raw input index of each model input.
    pub kept_dims: Vec<usize>,
}

impl DatasetSummary {
    pub fn of(data: &LoadedDataset) -> Self {
        DatasetSummary {
            fingerprint: data.fingerprint.clone(),
            n_train: data.train.len(),
            n_test: data.test.len(),
            raw_dims: data.mask.raw_dims,
            kept_dims: data.mask.kept_dims.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub laplace_iterations: Option<usize>,
    /// Infinity norm of the Laplace stationarity residual.
    pub laplace_residual: Option<f64>,
    pub num_centers: usize,
    /// DTC log marginal likelihood before and after optimization.
    pub dtc_objective: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRecord {
    pub dims: [usize; 2],
    pub bound: f64,
    pub l_path: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub per_dim_bounds: Vec<f64>,
    pub coarse_bounds: Vec<f64>,
    pub order: Vec<usize>,
    pub sorted_cumulative: Vec<f64>,
    pub certified_min_inputs: MinInputs,
    pub joint: Vec<JointRecord>,
    /// Bound on any two-input change, present when joint bounds ran.
    pub two_input_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub n_dims: usize,
    pub trials: u64,
    pub random_max: Option<f64>,
    /// Grid oracle value per input set.
    pub grid: Vec<(Vec<usize>, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackPointRecord {
    pub test_index: usize,
    pub modified: usize,
    pub succeeded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub n_confident: usize,
    pub per_point: Vec<AttackPointRecord>,
    /// Fewest inputs any successful attack changed.
    pub min_modified: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandwichRecord {
    pub checks: Vec<String>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub verb: String,
    /// Hash of the settings that determine the certificate.
    pub key: String,
    pub point: BTreeMap<String, f64>,
    pub config: ExperimentConfig,
    pub dataset: Option<DatasetSummary>,
    pub fit: Option<FitSummary>,
    pub accuracy: Option<f64>,
    pub thresholds: Option<ThresholdPair>,
    pub certificate: Option<CertificateRecord>,
    pub oracle: Option<OracleRecord>,
    pub attack: Option<AttackRecord>,
    pub sandwich: Option<SandwichRecord>,
    pub error: Option<StageError>,
    /// Seconds per stage. Not covered by determinism.
    pub elapsed: BTreeMap<String, f64>,
}

/// Hash of the dataset, model, certify and joint settings and the seed.
pub fn certificate_key(cfg: &ExperimentConfig) -> String {
    let v = serde_json::json!({
        "seed": cfg.seed,
        "dataset": cfg.dataset,
        "model": cfg.model,
        "certify": cfg.certify,
        "joint": cfg.joint,
    });
    let h = Sha256::digest(v.to_string().as_bytes());
    h.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

impl ResultRecord {
    pub fn new(verb: &str, cfg: &ExperimentConfig, point: BTreeMap<String, f64>) -> Self {
        ResultRecord {
            schema_version: SCHEMA_VERSION,
            verb: verb.to_string(),
            key: certificate_key(cfg),
            point,
            config: cfg.clone(),
            dataset: None,
            fit: None,
            accuracy: None,
            thresholds: None,
            certificate: None,
            oracle: None,
            attack: None,
            sandwich: None,
            error: None,
            elapsed: BTreeMap::new(),
        }
    }

    /// The record as JSON with timing removed, for determinism checks.
    pub fn without_elapsed(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("records serialize");
        v.as_object_mut().expect("record is an object").remove("elapsed");
        v
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    pub fn has_violation(&self) -> bool {
        self.sandwich.as_ref().is_some_and(|s| !s.violations.is_empty())
    }
}

/// Appends one record as a line and flushes it.
pub fn append_record(path: &Path, rec: &ResultRecord) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{}", rec.to_line()).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// Reads every complete record; a truncated final line is skipped.
pub fn read_records(path: &Path) -> Result<Vec<ResultRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(f)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() => log::warn!("{}: skipping truncated last line", path.display()),
            Err(e) => return Err(Error::format(path, format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}
