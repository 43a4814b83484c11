//! Deterministic training conditional (DTC) compression of a fitted
//! classifier onto a few inducing inputs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LatentModel;
use crate::error::{check_dims, Error, Result};
use crate::kernel::{sq_dist, sq_dist_matrix, KernelSpec, PointSet, PsdFactor};

/// Gradient ascent settings for the inducing inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Number of accepted-or-rejected gradient evaluations.
    pub max_steps: usize,
    /// Largest single-coordinate move of the first step.
    pub initial_step: f64,
    pub min_step: f64,
    /// Central finite-difference step.
    pub fd_step: f64,
    pub seed: u64,
    /// Keep inducing inputs inside the unit box.
    pub clamp_to_unit: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_steps: 40,
            initial_step: 0.05,
            min_step: 1e-6,
            fd_step: 1e-5,
            seed: 0,
            clamp_to_unit: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseFit {
    pub model: LatentModel,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
    pub steps: usize,
    /// Set when a non-finite gradient stopped the optimizer early.
    pub diverged: bool,
}

/// DTC pieces that only depend on the squared distances.
struct DtcSystem<'a> {
    f_hat: &'a DVector<f64>,
    kernel: KernelSpec,
    noise_variance: f64,
}

struct DtcSolve {
    a_factor: PsdFactor,
    kuu_factor: PsdFactor,
    c: DVector<f64>,
}

impl DtcSystem<'_> {
    fn solve(&self, d_uf: &DMatrix<f64>, d_uu: &DMatrix<f64>) -> Result<DtcSolve> {
        let k_uf = d_uf.map(|d| self.kernel.from_sq_dist(d));
        let mut k_uu = d_uu.map(|d| self.kernel.from_sq_dist(d));
        // symmetrize exactly so the factorization sees a symmetric matrix
        for i in 0..k_uu.nrows() {
            for j in 0..i {
                let v = 0.5 * (k_uu[(i, j)] + k_uu[(j, i)]);
                k_uu[(i, j)] = v;
                k_uu[(j, i)] = v;
            }
        }
        let kuu_factor = PsdFactor::new(&k_uu, self.kernel.default_jitter())?;
        let m = k_uu.nrows();
        for i in 0..m {
            k_uu[(i, i)] += kuu_factor.jitter;
        }
        let a = &k_uu * self.noise_variance + &k_uf * k_uf.transpose();
        let a_factor = PsdFactor::new(&a, 0.0)?;
        let c = &k_uf * self.f_hat;
        Ok(DtcSolve {
            a_factor,
            kuu_factor,
            c,
        })
    }

    fn log_marginal(&self, d_uf: &DMatrix<f64>, d_uu: &DMatrix<f64>) -> Result<f64> {
        let s = self.solve(d_uf, d_uu)?;
        let n = self.f_hat.len() as f64;
        let m = d_uu.nrows() as f64;
        let s2 = self.noise_variance;
        let quad = (self.f_hat.dot(self.f_hat) - s.c.dot(&s.a_factor.solve_vec(&s.c))) / s2;
        let log_det = (n - m) * s2.ln() + s.a_factor.log_det() - s.kuu_factor.log_det();
        let value = -0.5 * quad - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFinite("DTC log marginal likelihood"))
        }
    }
}

fn check_sparse_inputs(z: &PointSet, x: &PointSet, f_hat: &[f64], noise_variance: f64) -> Result<()> {
    check_dims(x.dims(), z.dims())?;
    check_dims(x.rows(), f_hat.len())?;
    if z.rows() == 0 {
        return Err(Error::invalid("need at least one inducing input"));
    }
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::invalid("DTC needs a positive noise variance"));
    }
    Ok(())
}

/// `log N(f_hat | 0, K_fu K_uu^-1 K_uf + sigma^2 I)`, evaluated with the
/// Woodbury identity in `O(N m^2)`.
pub fn dtc_log_marginal(
    z: &PointSet,
    x: &PointSet,
    f_hat: &[f64],
    kernel: &KernelSpec,
    noise_variance: f64,
) -> Result<f64> {
    check_sparse_inputs(z, x, f_hat, noise_variance)?;
    let f = DVector::from_column_slice(f_hat);
    let sys = DtcSystem {
        f_hat: &f,
        kernel: *kernel,
        noise_variance,
    };
    sys.log_marginal(&sq_dist_matrix(z, x)?, &sq_dist_matrix(z, z)?)
}

/// Latent model on the inducing inputs with
/// `alpha = sigma^-2 Sigma K_uf f_hat`, `Sigma = (sigma^-2 K_uf K_fu + K_uu)^-1`.
pub fn dtc_weights(
    z: &PointSet,
    x: &PointSet,
    f_hat: &[f64],
    kernel: &KernelSpec,
    noise_variance: f64,
) -> Result<LatentModel> {
    check_sparse_inputs(z, x, f_hat, noise_variance)?;
    let f = DVector::from_column_slice(f_hat);
    let sys = DtcSystem {
        f_hat: &f,
        kernel: *kernel,
        noise_variance,
    };
    let s = sys.solve(&sq_dist_matrix(z, x)?, &sq_dist_matrix(z, z)?)?;
    // sigma^-2 (sigma^-2 K_uf K_fu + K_uu)^-1 c == (K_uf K_fu + sigma^2 K_uu)^-1 c
    let alpha = s.a_factor.solve_vec(&s.c);
    LatentModel::new(z.clone(), alpha.iter().copied().collect(), *kernel, noise_variance)
}

/// `m` distinct training rows by farthest-point traversal from a seeded start.
pub fn farthest_point_init(x: &PointSet, m: usize, seed: u64) -> Result<Vec<usize>> {
    let n = x.rows();
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "need 1 <= m <= N inducing points, got m = {m}, N = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut min_dist: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    let mut taken = vec![false; n];
    taken[chosen[0]] = true;
    while chosen.len() < m {
        let mut best = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            match best {
                Some(b) if min_dist[i] <= min_dist[b] => {}
                _ => best = Some(i),
            }
        }
        let next = best.expect("m <= N leaves an untaken row");
        taken[next] = true;
        chosen.push(next);
        for i in 0..n {
            min_dist[i] = min_dist[i].min(sq_dist(x.row(i), x.row(next)));
        }
    }
    Ok(chosen)
}

/// Inducing-input optimization by finite-difference gradient ascent on the
/// DTC marginal likelihood, then DTC weights at the best inputs found.
///
/// Only improving steps are accepted, so the returned objective is never
/// below the initial one. With `max_steps == 0` and `m == N` the inducing
/// inputs stay on the (permuted) training points.
pub fn fit_sparse_dtc(
    x: &PointSet,
    f_hat: &[f64],
    kernel: &KernelSpec,
    noise_variance: f64,
    m: usize,
    opt: &OptimizerConfig,
) -> Result<SparseFit> {
    if m > x.rows() {
        return Err(Error::invalid(format!(
            "cannot use {m} inducing points with {} training points",
            x.rows()
        )));
    }
    let init = farthest_point_init(x, m, opt.seed)?;
    let z0 = x.select_rows(&init);
    optimize_inducing(z0, x, f_hat, kernel, noise_variance, opt)
}

pub(crate) fn optimize_inducing(
    mut z: PointSet,
    x: &PointSet,
    f_hat: &[f64],
    kernel: &KernelSpec,
    noise_variance: f64,
    opt: &OptimizerConfig,
) -> Result<SparseFit> {
    check_sparse_inputs(&z, x, f_hat, noise_variance)?;
    let f = DVector::from_column_slice(f_hat);
    let sys = DtcSystem {
        f_hat: &f,
        kernel: *kernel,
        noise_variance,
    };
    let (m, d, n) = (z.rows(), z.dims(), x.rows());
    let mut d_uf = sq_dist_matrix(&z, x)?;
    let mut d_uu = sq_dist_matrix(&z, &z)?;
    let mut objective = sys.log_marginal(&d_uf, &d_uu)?;
    let initial_objective = objective;
    let mut trace = vec![objective];
    let mut step = opt.initial_step;
    let mut steps = 0;
    let mut diverged = false;

    // Squared distances after moving coordinate c of inducing input j by h.
    let shifted = |z: &PointSet,
                   d_uf: &DMatrix<f64>,
                   d_uu: &DMatrix<f64>,
                   j: usize,
                   c: usize,
                   h: f64|
     -> (DMatrix<f64>, DMatrix<f64>) {
        let zc = z.row(j)[c];
        let mut uf = d_uf.clone();
        for i in 0..n {
            let diff = zc - x.row(i)[c];
            uf[(j, i)] = (uf[(j, i)] + h * (2.0 * diff + h)).max(0.0);
        }
        let mut uu = d_uu.clone();
        for k in 0..m {
            if k != j {
                let diff = zc - z.row(k)[c];
                let v = (uu[(j, k)] + h * (2.0 * diff + h)).max(0.0);
                uu[(j, k)] = v;
                uu[(k, j)] = v;
            }
        }
        (uf, uu)
    };

    while steps < opt.max_steps && step >= opt.min_step {
        steps += 1;
        let h = opt.fd_step;
        let mut grad = vec![0.0; m * d];
        for j in 0..m {
            for c in 0..d {
                let (ufp, uup) = shifted(&z, &d_uf, &d_uu, j, c, h);
                let (ufm, uum) = shifted(&z, &d_uf, &d_uu, j, c, -h);
                let fp = sys.log_marginal(&ufp, &uup);
                let fm = sys.log_marginal(&ufm, &uum);
                grad[j * d + c] = match (fp, fm) {
                    (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
                    _ => f64::NAN,
                };
            }
        }
        if grad.iter().any(|g| !g.is_finite()) {
            diverged = true;
            break;
        }
        let gmax = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
        if gmax == 0.0 {
            break;
        }
        // Halve the step until the objective improves.
        loop {
            let mut candidate = z.clone();
            for j in 0..m {
                for (c, v) in candidate.row_mut(j).iter_mut().enumerate() {
                    *v += step * grad[j * d + c] / gmax;
                    if opt.clamp_to_unit {
                        *v = v.clamp(0.0, 1.0);
                    }
                }
            }
            let cand_uf = sq_dist_matrix(&candidate, x)?;
            let cand_uu = sq_dist_matrix(&candidate, &candidate)?;
            match sys.log_marginal(&cand_uf, &cand_uu) {
                Ok(value) if value > objective => {
                    z = candidate;
                    d_uf = cand_uf;
                    d_uu = cand_uu;
                    objective = value;
                    trace.push(value);
                    step *= 1.25;
                    break;
                }
                _ => {
                    step *= 0.5;
                    if step < opt.min_step {
                        break;
                    }
                }
            }
        }
    }
    if diverged {
        log::warn!("inducing-point optimizer stopped on a non-finite gradient; returning best iterate");
    }
    let model = dtc_weights(&z, x, f_hat, kernel, noise_variance)?;
    Ok(SparseFit {
        model,
        initial_objective,
        final_objective: objective,
        trace,
        steps,
        diverged,
    })
}
