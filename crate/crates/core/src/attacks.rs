//! Empirical lower bounds on how far the latent can move: a gradient-guided
//! axis search that counts modified inputs, seeded random perturbations and
//! an exhaustive grid oracle for the soundness tests.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::gp::{latent_gradient, LatentModel, ThresholdPair};
use crate::kernel::sq_dist;

/// What counts as a successful attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackGoal {
    /// Cross from one side of the threshold pair to beyond the other:
    /// points below the midpoint must reach `f95`, the rest `f05`.
    PercentileCrossing,
    /// Move the latent by at least the gap in the direction of the other
    /// class.
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackStep {
    pub dim: usize,
    pub old_value: f64,
    pub new_value: f64,
    pub latent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub modified_dims: Vec<usize>,
    pub start_latent: f64,
    pub final_latent: f64,
    pub succeeded: bool,
    pub trace: Vec<AttackStep>,
}

impl AttackResult {
    /// Applies the trace to `x0`.
    pub fn replay(&self, x0: &[f64]) -> Vec<f64> {
        let mut x = x0.to_vec();
        for step in &self.trace {
            x[step.dim] = step.new_value;
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub max_inputs: usize,
    pub line_resolution: usize,
    pub goal: AttackGoal,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            max_inputs: 50,
            line_resolution: 101,
            goal: AttackGoal::PercentileCrossing,
        }
    }
}

/// Latent mean kept in sync with a point that changes one coordinate at a
/// time, through per-centre squared distances.
struct Tracker<'a> {
    model: &'a LatentModel,
    x: Vec<f64>,
    dist2: Vec<f64>,
}

impl<'a> Tracker<'a> {
    fn new(model: &'a LatentModel, x: &[f64]) -> Self {
        let dist2 = model.centers.iter_rows().map(|c| sq_dist(c, x)).collect();
        Tracker {
            model,
            x: x.to_vec(),
            dist2,
        }
    }

    /// Latent if coordinate `dim` were set to `value`.
    fn latent_with(&self, dim: usize, value: f64) -> f64 {
        let old = self.x[dim];
        self.model
            .centers
            .iter_rows()
            .zip(&self.dist2)
            .zip(&self.model.alpha)
            .map(|((c, d2), a)| {
                let d2 = d2 - (old - c[dim]).powi(2) + (value - c[dim]).powi(2);
                a * self.model.kernel.from_sq_dist(d2.max(0.0))
            })
            .sum()
    }

    fn set(&mut self, dim: usize, value: f64) {
        self.x[dim] = value;
        // recompute exactly so the trace replays bit-for-bit
        for (d2, c) in self.dist2.iter_mut().zip(self.model.centers.iter_rows()) {
            *d2 = sq_dist(c, &self.x);
        }
    }
}

/// Greedy L0 attack: repeatedly take the unmodified input with the largest
/// absolute latent gradient and set it to the best of `line_resolution`
/// evenly spaced values in `[0, 1]`.
pub fn axis_search_attack(
    model: &LatentModel,
    x0: &[f64],
    thresholds: &ThresholdPair,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    check_dims(model.dims(), x0.len())?;
    if cfg.line_resolution < 2 {
        return Err(Error::invalid("line_resolution must be >= 2"));
    }
    if x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("attack start point must lie in the unit hypercube"));
    }
    let start_latent = model.latent(x0)?;
    let mid = 0.5 * (thresholds.f05 + thresholds.f95);
    let upward = start_latent < mid;
    let reached = |f: f64| match (cfg.goal, upward) {
        (AttackGoal::PercentileCrossing, true) => f >= thresholds.f95,
        (AttackGoal::PercentileCrossing, false) => f <= thresholds.f05,
        (AttackGoal::Gap, true) => f - start_latent >= thresholds.gap,
        (AttackGoal::Gap, false) => start_latent - f >= thresholds.gap,
    };

    let mut tracker = Tracker::new(model, x0);
    let mut latent = start_latent;
    let mut modified = vec![false; x0.len()];
    let mut result = AttackResult {
        modified_dims: Vec::new(),
        start_latent,
        final_latent: start_latent,
        succeeded: reached(start_latent),
        trace: Vec::new(),
    };
    while !result.succeeded && result.modified_dims.len() < cfg.max_inputs.min(x0.len()) {
        let grad = latent_gradient(model, &tracker.x)?;
        let Some(dim) = (0..grad.len())
            .filter(|&d| !modified[d])
            .fold(None, |best: Option<usize>, d| match best {
                Some(b) if grad[b].abs() >= grad[d].abs() => Some(b),
                _ => Some(d),
            })
        else {
            break;
        };
        let mut best_value = tracker.x[dim];
        let mut best_latent = f64::NAN;
        for k in 0..cfg.line_resolution {
            let v = k as f64 / (cfg.line_resolution - 1) as f64;
            let f = tracker.latent_with(dim, v);
            let better = best_latent.is_nan() || if upward { f > best_latent } else { f < best_latent };
            if better {
                best_latent = f;
                best_value = v;
            }
        }
        let old_value = tracker.x[dim];
        tracker.set(dim, best_value);
        modified[dim] = true;
        latent = model.latent_unchecked(&tracker.x);
        result.modified_dims.push(dim);
        result.trace.push(AttackStep {
            dim,
            old_value,
            new_value: best_value,
            latent,
        });
        result.succeeded = reached(latent);
    }
    result.final_latent = latent;
    Ok(result)
}

const CHUNK: u64 = 4096;

/// Largest `|f(x') - f(x)|` over `trials` seeded draws of a base point `x`
/// uniform in the unit hypercube and `x'` equal to `x` except for `n_dims`
/// distinct inputs redrawn uniformly.
///
/// Trials are drawn in fixed-size chunks, each from its own stream of the
/// seeded generator, so the result for `t` trials is the same whether the
/// chunks are evaluated in parallel or not, and never decreases as `t`
/// grows.
pub fn random_perturbation_search(
    model: &LatentModel,
    n_dims: usize,
    trials: u64,
    seed: u64,
    parallel: bool,
) -> Result<f64> {
    let d = model.dims();
    if n_dims == 0 || n_dims > d {
        return Err(Error::invalid(format!("n_dims must be in 1..={d}, got {n_dims}")));
    }
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let chunks = trials.div_ceil(CHUNK);
    let run = |chunk: u64| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let count = CHUNK.min(trials - chunk * CHUNK);
        let mut x = vec![0.0; d];
        let mut dist2 = vec![0.0; model.num_centers()];
        let mut best = 0.0f64;
        for _ in 0..count {
            x.iter_mut().for_each(|v| *v = rng.random());
            let dims = sample(&mut rng, d, n_dims);
            let values: Vec<f64> = (0..n_dims).map(|_| rng.random()).collect();
            let mut before = 0.0;
            let mut after = 0.0;
            for (i, c) in model.centers.iter_rows().enumerate() {
                dist2[i] = sq_dist(c, &x);
                let mut moved = dist2[i];
                for (k, dim) in dims.iter().enumerate() {
                    moved += (values[k] - c[dim]).powi(2) - (x[dim] - c[dim]).powi(2);
                }
                before += model.alpha[i] * model.kernel.from_sq_dist(dist2[i]);
                after += model.alpha[i] * model.kernel.from_sq_dist(moved.max(0.0));
            }
            best = best.max((after - before).abs());
        }
        best
    };
    let best = if parallel {
        (0..chunks).into_par_iter().map(run).reduce(|| 0.0, f64::max)
    } else {
        (0..chunks).map(run).fold(0.0, f64::max)
    };
    Ok(best)
}

/// Where the oracle places the coordinates that are not being changed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PerpSampling {
    /// Every node of a grid with this many points per remaining axis.
    Grid { points_per_axis: usize },
    /// Seeded uniform draws.
    Random { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Grid points per changed axis.
    pub resolution: usize,
    pub perp: PerpSampling,
    /// Refuse instances needing more kernel evaluations than this.
    pub max_evaluations: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            resolution: 200,
            perp: PerpSampling::Random {
                samples: 1000,
                seed: 0,
            },
            max_evaluations: 20_000_000_000,
        }
    }
}

/// Exhaustive `max |f(x') - f(x)|` over grid base points and grid
/// replacement values on `dims` (one or two inputs).
///
/// For each perpendicular sample the changed inputs range over the full
/// grid for both `x` and `x'`, so the result is `max - min` over the grid.
/// It is a lower bound on the true maximum change.
pub fn axis_grid_oracle(model: &LatentModel, dims: &[usize], cfg: &OracleConfig) -> Result<f64> {
    let d = model.dims();
    if dims.is_empty() || dims.len() > 2 {
        return Err(Error::invalid("oracle supports one or two changed inputs"));
    }
    if dims.iter().any(|&k| k >= d) || (dims.len() == 2 && dims[0] == dims[1]) {
        return Err(Error::invalid("oracle dims must be distinct and in range"));
    }
    if cfg.resolution < 2 {
        return Err(Error::invalid("oracle resolution must be >= 2"));
    }
    let perp_dims: Vec<usize> = (0..d).filter(|k| !dims.contains(k)).collect();
    let perp_points = perp_samples(&perp_dims, &cfg.perp)?;
    let m = model.num_centers();
    let evals = (perp_points.len() as u64)
        .saturating_mul((cfg.resolution as u64).saturating_pow(dims.len() as u32))
        .saturating_mul(m as u64);
    if evals > cfg.max_evaluations {
        return Err(Error::BudgetExceeded {
            required: evals,
            cap: cfg.max_evaluations,
        });
    }
    if m == 0 {
        return Ok(0.0);
    }
    let inv = model.kernel.inv_two_l2();
    let res = cfg.resolution;
    let node = |k: usize| k as f64 / (res - 1) as f64;
    // res x M tables of the 1-D factors on each changed axis
    let axis_table = |dim: usize| {
        DMatrix::from_fn(res, m, |k, i| {
            let t = node(k) - model.centers.row(i)[dim];
            (-t * t * inv).exp()
        })
    };
    let t0 = axis_table(dims[0]);
    let t1 = dims.get(1).map(|&k| axis_table(k));
    // M x P perpendicular factors, times alpha v
    let p = perp_points.len();
    let phi = DMatrix::from_fn(m, p, |i, s| {
        let c = model.centers.row(i);
        let d2: f64 = perp_dims.iter().zip(&perp_points[s]).map(|(&k, v)| (v - c[k]).powi(2)).sum();
        model.alpha[i] * model.kernel.variance * (-d2 * inv).exp()
    });
    let spread = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        hi - lo
    };
    let best = match &t1 {
        None => {
            let values = &t0 * &phi;
            (0..p).map(|s| spread(values.column(s).as_slice())).fold(0.0, f64::max)
        }
        Some(t1) => (0..p)
            .map(|s| {
                let mut scaled = t0.clone();
                for i in 0..m {
                    scaled.column_mut(i).scale_mut(phi[(i, s)]);
                }
                let values = scaled * t1.transpose();
                spread(values.as_slice())
            })
            .fold(0.0, f64::max),
    };
    Ok(best)
}

fn perp_samples(perp_dims: &[usize], sampling: &PerpSampling) -> Result<Vec<Vec<f64>>> {
    let k = perp_dims.len();
    if k == 0 {
        return Ok(vec![Vec::new()]);
    }
    match *sampling {
        PerpSampling::Grid { points_per_axis } => {
            if points_per_axis < 1 {
                return Err(Error::invalid("perpendicular grid needs at least one point per axis"));
            }
            let total = points_per_axis
                .checked_pow(k as u32)
                .ok_or_else(|| Error::invalid("perpendicular grid too large"))?;
            let node = |a: usize| {
                if points_per_axis == 1 {
                    0.5
                } else {
                    a as f64 / (points_per_axis - 1) as f64
                }
            };
            Ok((0..total)
                .map(|mut idx| {
                    (0..k)
                        .map(|_| {
                            let v = node(idx % points_per_axis);
                            idx /= points_per_axis;
                            v
                        })
                        .collect()
                })
                .collect())
        }
        PerpSampling::Random { samples, seed } => {
            if samples == 0 {
                return Err(Error::invalid("need at least one perpendicular sample"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..samples).map(|_| (0..k).map(|_| rng.random()).collect()).collect())
        }
    }
}
