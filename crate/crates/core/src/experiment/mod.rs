//! Config-driven pipeline: load data, fit, threshold, certify, attack and
//! emit one JSON record per run.

pub mod cli;
mod config;
mod record;

use std::collections::BTreeMap;
use std::time::Instant;

pub use config::{
    AttackSection, ExperimentConfig, GpcConfig, JointConfig, LrConfig, ModelConfig, OracleSection,
    SweepConfig,
};
pub use record::{
    append_record, certificate_key, read_records, AttackPointRecord, AttackRecord, CertificateRecord, DatasetSummary,
    FitSummary, JointRecord, OracleRecord, ResultRecord, SandwichRecord, StageError, SCHEMA_VERSION,
};

use crate::attacks::{axis_grid_oracle, axis_search_attack, random_perturbation_search};
use crate::bound::{bound_joint_pair_with, certify, MinInputs};
use crate::datasets::{self, LoadedDataset};
use crate::error::{Error, Result};
use crate::gp::{
    accuracy, compute_thresholds, fit_laplace, fit_sparse_dtc, regression_weights, LatentModel,
};
use crate::kernel::KernelSpec;
use crate::lr::{fit_lr, lr_accuracy, lr_certified_min_inputs, lr_thresholds, LinearModel};

/// Relative slack allowed when comparing an oracle value with a bound.
const SANDWICH_TOL: f64 = 1e-9;

/// Which optional stages run after fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Stages {
    pub certify: bool,
    pub oracle: bool,
    pub attack: bool,
}

/// Caps shared by every stage of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub strict_deterministic: bool,
    /// Kernel evaluations allowed to each oracle.
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Gp(LatentModel),
    Lr(LinearModel),
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.0.insert(stage.to_string(), t.elapsed().as_secs_f64());
        out
    }
}

fn staged<T>(stage: &'static str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|e| StageError {
        stage: stage.to_string(),
        message: e.to_string(),
    })
}

/// Fits the configured model on the training split.
pub fn fit_model(cfg: &ExperimentConfig, data: &LoadedDataset) -> Result<(FittedModel, FitSummary)> {
    match &cfg.model {
        ModelConfig::Gpc(g) => {
            let kernel = KernelSpec::new(g.variance, g.lengthscale)?;
            let lap = fit_laplace(&data.train, &kernel, g.laplace_tol, g.laplace_max_iter)?;
            let mut summary = FitSummary {
                laplace_iterations: Some(lap.iterations),
                laplace_residual: Some(lap.final_gradient_norm),
                num_centers: 0,
                dtc_objective: None,
            };
            let model = match g.inducing {
                None => regression_weights(&data.train.x, &lap.f_hat, &kernel, g.noise_variance)?,
                Some(m) => {
                    let sparse = fit_sparse_dtc(&data.train.x, &lap.f_hat, &kernel, g.noise_variance, m, &g.optimizer)?;
                    summary.dtc_objective = Some((sparse.initial_objective, sparse.final_objective));
                    sparse.model
                }
            };
            summary.num_centers = model.num_centers();
            Ok((FittedModel::Gp(model), summary))
        }
        ModelConfig::Lr(l) => {
            let model = fit_lr(&data.train, l.c, l.tol, l.max_iter)?;
            Ok((
                FittedModel::Lr(model),
                FitSummary {
                    laplace_iterations: None,
                    laplace_residual: None,
                    num_centers: 0,
                    dtc_objective: None,
                },
            ))
        }
    }
}

/// Bound on the latent change from perturbing any `k` inputs together.
fn k_input_bound(cert: &CertificateRecord, k: usize) -> f64 {
    if k == 2 {
        if let Some(b) = cert.two_input_bound {
            return b;
        }
    }
    cert.sorted_cumulative
        .get(k.saturating_sub(1))
        .or(cert.sorted_cumulative.last())
        .copied()
        .unwrap_or(0.0)
}

fn set_bound(cert: &CertificateRecord, dims: &[usize]) -> f64 {
    match dims {
        [d] => cert.per_dim_bounds[*d],
        [a, b] => {
            let single = cert.per_dim_bounds[*a] + cert.per_dim_bounds[*b];
            cert.joint
                .iter()
                .find(|j| (j.dims == [*a, *b]) || (j.dims == [*b, *a]))
                .map_or(single, |j| j.bound.min(single))
        }
        _ => k_input_bound(cert, dims.len()),
    }
}

/// Checks oracle values against bounds and attack counts against the
/// certificate.
pub fn sandwich(
    cert: &CertificateRecord,
    oracle: Option<&OracleRecord>,
    attack: Option<&AttackRecord>,
) -> SandwichRecord {
    let mut checks = Vec::new();
    let mut violations = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            violations.push(msg.clone());
        }
        checks.push(msg);
    };
    if let Some(o) = oracle {
        if let Some(v) = o.random_max {
            let b = k_input_bound(cert, o.n_dims);
            check(
                v <= b * (1.0 + SANDWICH_TOL) + SANDWICH_TOL,
                format!("random search over {} inputs {v} <= bound {b}", o.n_dims),
            );
        }
        for g in &o.grid {
            let b = set_bound(cert, &g.0);
            check(
                g.1 <= b * (1.0 + SANDWICH_TOL) + SANDWICH_TOL,
                format!("grid oracle on {:?} {} <= bound {b}", g.0, g.1),
            );
        }
    }
    if let Some(a) = attack {
        if let Some(found) = a.min_modified {
            let ok = match cert.certified_min_inputs {
                MinInputs::Count(n) => found >= n,
                MinInputs::UnboundedSafe => false,
            };
            check(
                ok,
                format!("attack needed {found} inputs, certificate {}", cert.certified_min_inputs),
            );
        }
    }
    SandwichRecord { checks, violations }
}

fn run_certify(
    cfg: &ExperimentConfig,
    model: &FittedModel,
    thresholds: &crate::gp::ThresholdPair,
    opts: &RunOptions,
) -> Result<CertificateRecord> {
    match model {
        FittedModel::Lr(lr) => {
            let per_dim: Vec<f64> = lr.weights.iter().map(|w| w.abs()).collect();
            let (order, cumulative, _) = crate::bound::cumulative_certificate(&per_dim, thresholds.gap);
            Ok(CertificateRecord {
                coarse_bounds: per_dim.clone(),
                per_dim_bounds: per_dim,
                order,
                sorted_cumulative: cumulative,
                certified_min_inputs: lr_certified_min_inputs(lr, thresholds),
                joint: Vec::new(),
                two_input_bound: None,
            })
        }
        FittedModel::Gp(gp) => {
            let mut ccfg = cfg.certify;
            ccfg.strict_deterministic |= opts.strict_deterministic;
            let c = certify(gp, thresholds, &ccfg)?;
            let mut rec = CertificateRecord {
                per_dim_bounds: c.per_dim_bounds,
                coarse_bounds: c.coarse_bounds,
                order: c.order,
                sorted_cumulative: c.sorted_cumulative,
                certified_min_inputs: c.certified_min_inputs,
                joint: Vec::new(),
                two_input_bound: None,
            };
            if let Some(j) = &cfg.joint {
                let s = j.slices.unwrap_or(ccfg.slices);
                let top: Vec<usize> = rec.order.iter().copied().take(j.top_dims).collect();
                for (i, &a) in top.iter().enumerate() {
                    for &b in &top[i + 1..] {
                        let jb = bound_joint_pair_with(gp, a, b, s, j.enhance.as_ref(), &ccfg.mixture)?;
                        rec.joint.push(JointRecord {
                            dims: [a, b],
                            bound: jb.bound,
                            l_path: jb.l_path,
                        });
                    }
                }
                // pairs without a joint bound fall back to the sum of singles
                let d = gp.dims();
                let mut worst: f64 = 0.0;
                for a in 0..d {
                    for b in a + 1..d {
                        worst = worst.max(set_bound(&rec, &[a, b]));
                    }
                }
                if d >= 2 {
                    rec.two_input_bound = Some(worst);
                }
            }
            Ok(rec)
        }
    }
}

fn run_oracle(cfg: &ExperimentConfig, gp: &LatentModel, opts: &RunOptions) -> Result<OracleRecord> {
    let o = cfg.oracle.clone().unwrap_or_default();
    let mut rec = OracleRecord {
        n_dims: o.n_dims,
        trials: o.trials,
        random_max: None,
        grid: Vec::new(),
    };
    if o.trials > 0 {
        let cost = o.trials.saturating_mul(2 * gp.num_centers() as u64);
        if let Some(cap) = opts.budget {
            if cost > cap {
                return Err(Error::BudgetExceeded { required: cost, cap });
            }
        }
        let parallel = o.parallel && !opts.strict_deterministic;
        rec.random_max = Some(random_perturbation_search(gp, o.n_dims, o.trials, cfg.seed, parallel)?);
    }
    let mut grid = o.grid;
    if let Some(cap) = opts.budget {
        grid.max_evaluations = grid.max_evaluations.min(cap);
    }
    for dims in &o.grid_dims {
        rec.grid.push((dims.clone(), axis_grid_oracle(gp, dims, &grid)?));
    }
    Ok(rec)
}

fn run_attack(
    cfg: &ExperimentConfig,
    gp: &LatentModel,
    data: &LoadedDataset,
    thresholds: &crate::gp::ThresholdPair,
) -> Result<AttackRecord> {
    let a = cfg.attack.unwrap_or_default();
    let acfg = a.attack_config();
    let mut per_point = Vec::new();
    let mut n_confident = 0;
    for i in 0..data.test.len() {
        let x = data.test.x.row(i);
        let f = gp.latent(x)?;
        let confident = (data.test.y[i] > 0.0 && f >= thresholds.f95) || (data.test.y[i] < 0.0 && f <= thresholds.f05);
        if !confident {
            continue;
        }
        n_confident += 1;
        if a.max_points.is_some_and(|m| per_point.len() >= m) {
            continue;
        }
        let r = axis_search_attack(gp, x, thresholds, &acfg)?;
        per_point.push(AttackPointRecord {
            test_index: i,
            modified: r.modified_dims.len(),
            succeeded: r.succeeded,
        });
    }
    if n_confident == 0 {
        log::warn!("no confidently classified test points to attack");
    }
    let min_modified = per_point.iter().filter(|p| p.succeeded).map(|p| p.modified).min();
    Ok(AttackRecord {
        n_confident,
        per_point,
        min_modified,
    })
}

/// Runs one parameter point. Stage failures are recorded, not returned.
pub fn run_point(
    cfg: &ExperimentConfig,
    verb: &str,
    point: BTreeMap<String, f64>,
    stages: Stages,
    opts: &RunOptions,
) -> ResultRecord {
    let mut rec = ResultRecord::new(verb, cfg, point);
    let mut timer = Timer(BTreeMap::new());
    let out = (|| -> std::result::Result<(), StageError> {
        let data = timer.time("dataset", || staged("dataset", datasets::load(&cfg.dataset)))?;
        rec.dataset = Some(DatasetSummary::of(&data));
        let (model, fit) = timer.time("fit", || staged("fit", fit_model(cfg, &data)))?;
        rec.fit = Some(fit);
        let (acc, thresholds) = staged(
            "threshold",
            match &model {
                FittedModel::Gp(gp) => accuracy(gp, &data.test).and_then(|a| Ok((a, compute_thresholds(gp, &data.train.x)?))),
                FittedModel::Lr(lr) => lr_accuracy(lr, &data.test).and_then(|a| Ok((a, lr_thresholds(lr, &data.train.x)?))),
            },
        )?;
        rec.accuracy = Some(acc);
        rec.thresholds = Some(thresholds);
        if stages.certify {
            let c = timer.time("certify", || staged("certify", run_certify(cfg, &model, &thresholds, opts)))?;
            rec.certificate = Some(c);
        }
        if let FittedModel::Gp(gp) = &model {
            if stages.oracle {
                rec.oracle = Some(timer.time("oracle", || staged("oracle", run_oracle(cfg, gp, opts)))?);
            }
            if stages.attack {
                rec.attack = Some(timer.time("attack", || staged("attack", run_attack(cfg, gp, &data, &thresholds)))?);
            }
        }
        Ok(())
    })();
    if let Err(e) = out {
        rec.error = Some(e);
    }
    if let Some(c) = &rec.certificate {
        if rec.oracle.is_some() || rec.attack.is_some() {
            rec.sandwich = Some(sandwich(c, rec.oracle.as_ref(), rec.attack.as_ref()));
        }
    }
    rec.elapsed = timer.0;
    rec
}

/// The fitted model alone, for serialization.
pub fn fit_only(cfg: &ExperimentConfig) -> Result<(FittedModel, LoadedDataset)> {
    let data = datasets::load(&cfg.dataset)?;
    let (model, _) = fit_model(cfg, &data)?;
    Ok((model, data))
}
