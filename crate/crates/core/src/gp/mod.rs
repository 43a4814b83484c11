//! Binary Gaussian-process classification with the Laplace approximation.
//!
//! The classifier is reduced to a [`LatentModel`]: a weighted sum of EQ
//! kernels centred on training (or inducing) points. Everything downstream,
//! certification and attacks alike, consumes that one object.

mod model_io;
mod sparse;

pub use model_io::{model_from_str, model_to_string, read_model, write_model, MODEL_FORMAT_HEADER};
pub use sparse::{
    dtc_log_marginal, dtc_weights, farthest_point_init, fit_sparse_dtc, OptimizerConfig,
    SparseFit,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::kernel::{cross_covariance, solve_psd_vec, sq_dist, KernelSpec, PointSet};

/// Inputs with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: PointSet,
    pub y: Vec<f64>,
    pub feature_names: Option<Vec<String>>,
}

impl LabeledDataset {
    pub fn new(x: PointSet, y: Vec<f64>) -> Result<Self> {
        check_dims(x.rows(), y.len())?;
        if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::invalid(format!("labels must be -1 or +1, got {bad}")));
        }
        Ok(LabeledDataset {
            x,
            y,
            feature_names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.x.dims()
    }

    pub fn has_both_classes(&self) -> bool {
        self.y.iter().any(|&v| v > 0.0) && self.y.iter().any(|&v| v < 0.0)
    }

    pub fn select_rows(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn select_columns(&self, columns: &[usize]) -> LabeledDataset {
        LabeledDataset {
            x: self.x.select_columns(columns),
            y: self.y.clone(),
            feature_names: self
                .feature_names
                .as_ref()
                .map(|names| columns.iter().map(|&c| names[c].clone()).collect()),
        }
    }
}

/// Posterior mode of the latent function at the training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceFit {
    pub f_hat: Vec<f64>,
    pub iterations: usize,
    pub final_gradient_norm: f64,
}

pub const DEFAULT_LAPLACE_TOL: f64 = 1e-8;
pub const DEFAULT_LAPLACE_MAX_ITER: usize = 100;

#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log sigma(z)` without overflow for large `|z|`.
#[inline]
fn log_logistic(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Newton iteration for the mode of `p(f | X, y)` under a logistic
/// likelihood, in the `B = I + W^1/2 K W^1/2` form.
///
/// Convergence is measured by the infinity norm of
/// `grad log p(y|f) - K^-1 f`, which with `f = K a` is `grad - a`.
pub fn fit_laplace(
    data: &LabeledDataset,
    kernel: &KernelSpec,
    tol: f64,
    max_iter: usize,
) -> Result<LaplaceFit> {
    kernel.validate()?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if !data.has_both_classes() {
        return Err(Error::invalid("Laplace fit needs both classes present"));
    }
    let n = data.len();
    let k = cross_covariance(&data.x, &data.x, kernel)?;
    let y = DVector::from_column_slice(&data.y);
    let targets = y.map(|v| 0.5 * (v + 1.0));

    let objective = |a: &DVector<f64>, f: &DVector<f64>| -> f64 {
        let lik: f64 = f.iter().zip(y.iter()).map(|(fi, yi)| log_logistic(yi * fi)).sum();
        lik - 0.5 * a.dot(f)
    };

    let mut a = DVector::zeros(n);
    let mut f = DVector::zeros(n);
    let mut psi = objective(&a, &f);
    let mut residual = f64::INFINITY;
    for iter in 0..=max_iter {
        let pi = f.map(logistic);
        let grad = &targets - &pi;
        residual = (&grad - &a).amax();
        if !residual.is_finite() {
            return Err(Error::NonFinite("Laplace gradient"));
        }
        if residual < tol {
            return Ok(LaplaceFit {
                f_hat: f.iter().copied().collect(),
                iterations: iter,
                final_gradient_norm: residual,
            });
        }
        if iter == max_iter {
            break;
        }
        let w = pi.map(|p| p * (1.0 - p));
        let sw = w.map(f64::sqrt);
        let mut b_mat = DMatrix::from_fn(n, n, |i, j| sw[i] * k[(i, j)] * sw[j]);
        for i in 0..n {
            b_mat[(i, i)] += 1.0;
        }
        let chol = b_mat
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { jitter: 0.0 })?;
        let b = w.component_mul(&f) + &grad;
        let kb = &k * &b;
        let inner = chol.solve(&sw.component_mul(&kb));
        let a_newton = &b - sw.component_mul(&inner);

        // Damped step: halve until the objective does not decrease.
        let mut eta = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let a_try = &a + (&a_newton - &a) * eta;
            let f_try = &k * &a_try;
            let psi_try = objective(&a_try, &f_try);
            if psi_try.is_finite() && psi_try >= psi - 1e-12 * psi.abs().max(1.0) {
                a = a_try;
                f = f_try;
                psi = psi_try;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            // Objective flat to rounding: take the full Newton step.
            a = a_newton;
            f = &k * &a;
            psi = objective(&a, &f);
        }
    }
    Err(Error::NonConvergence {
        solver: "Laplace Newton",
        iterations: max_iter,
        gradient_norm: residual,
    })
}

/// Weighted sum of EQ kernels: `f(x) = sum_i alpha_i k(c_i, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentModel {
    pub centers: PointSet,
    pub alpha: Vec<f64>,
    pub kernel: KernelSpec,
    pub noise_variance: f64,
}

impl LatentModel {
    pub fn new(
        centers: PointSet,
        alpha: Vec<f64>,
        kernel: KernelSpec,
        noise_variance: f64,
    ) -> Result<Self> {
        kernel.validate()?;
        check_dims(centers.rows(), alpha.len())?;
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("representer weights"));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::invalid("noise variance must be >= 0"));
        }
        Ok(LatentModel {
            centers,
            alpha,
            kernel,
            noise_variance,
        })
    }

    pub fn dims(&self) -> usize {
        self.centers.dims()
    }

    pub fn num_centers(&self) -> usize {
        self.alpha.len()
    }

    /// Latent mean at a single point.
    pub fn latent(&self, x: &[f64]) -> Result<f64> {
        check_dims(self.dims(), x.len())?;
        Ok(self.latent_unchecked(x))
    }

    #[inline]
    pub(crate) fn latent_unchecked(&self, x: &[f64]) -> f64 {
        self.centers
            .iter_rows()
            .zip(&self.alpha)
            .map(|(c, a)| a * self.kernel.from_sq_dist(sq_dist(c, x)))
            .sum()
    }

    /// `v * sum |alpha_i|`, an upper bound on `|f(x)|` everywhere.
    pub fn envelope(&self) -> f64 {
        self.kernel.variance * self.alpha.iter().map(|a| a.abs()).sum::<f64>()
    }
}

/// Representer weights `alpha = (K + sigma^2 I)^-1 f_hat` for regression on
/// the Laplace mode.
pub fn regression_weights(
    x: &PointSet,
    f_hat: &[f64],
    kernel: &KernelSpec,
    noise_variance: f64,
) -> Result<LatentModel> {
    check_dims(x.rows(), f_hat.len())?;
    if !(noise_variance >= 0.0) {
        return Err(Error::invalid("noise variance must be >= 0"));
    }
    let mut k = cross_covariance(x, x, kernel)?;
    for i in 0..x.rows() {
        k[(i, i)] += noise_variance;
    }
    let alpha = solve_psd_vec(&k, &DVector::from_column_slice(f_hat), kernel.default_jitter())?;
    LatentModel::new(
        x.clone(),
        alpha.iter().copied().collect(),
        *kernel,
        noise_variance,
    )
}

pub fn predict_latent(model: &LatentModel, xstar: &PointSet) -> Result<Vec<f64>> {
    check_dims(model.dims(), xstar.dims())?;
    Ok(xstar.iter_rows().map(|x| model.latent_unchecked(x)).collect())
}

/// Class label and probability `sigma(f(x))` for one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassPrediction {
    pub label: i8,
    pub probability: f64,
}

/// Sign of the latent mean with `sign(0) = +1`.
#[inline]
pub fn label_of(latent: f64) -> i8 {
    if latent >= 0.0 {
        1
    } else {
        -1
    }
}

pub fn predict_class(model: &LatentModel, xstar: &PointSet) -> Result<Vec<ClassPrediction>> {
    Ok(predict_latent(model, xstar)?
        .into_iter()
        .map(|f| ClassPrediction {
            label: label_of(f),
            probability: logistic(f),
        })
        .collect())
}

/// Gradient of the latent mean with respect to the input.
pub fn latent_gradient(model: &LatentModel, xstar: &[f64]) -> Result<Vec<f64>> {
    check_dims(model.dims(), xstar.len())?;
    let inv_l2 = 1.0 / (model.kernel.lengthscale * model.kernel.lengthscale);
    let mut grad = vec![0.0; xstar.len()];
    for (c, a) in model.centers.iter_rows().zip(&model.alpha) {
        let k = model.kernel.from_sq_dist(sq_dist(c, xstar));
        let scale = -a * k * inv_l2;
        for ((g, x), ci) in grad.iter_mut().zip(xstar).zip(c) {
            *g += scale * (x - ci);
        }
    }
    Ok(grad)
}

/// Latent values at the 5th and 95th percentile training points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub f05: f64,
    pub f95: f64,
    pub gap: f64,
}

impl ThresholdPair {
    pub fn new(f05: f64, f95: f64) -> Result<Self> {
        if !(f05 <= f95) {
            return Err(Error::invalid(format!(
                "thresholds out of order: f05 = {f05}, f95 = {f95}"
            )));
        }
        Ok(ThresholdPair {
            f05,
            f95,
            gap: f95 - f05,
        })
    }
}

/// Nearest-rank percentiles: rank `ceil(p N)` (1-based) of the ascending
/// latents, computed in integer arithmetic.
pub fn thresholds_from_latents(latents: &[f64]) -> Result<ThresholdPair> {
    let n = latents.len();
    if n < 2 {
        return Err(Error::invalid("thresholds need at least two training points"));
    }
    if latents.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training latents"));
    }
    let mut sorted = latents.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = |percent: usize| ((percent * n + 99) / 100).max(1);
    ThresholdPair::new(sorted[rank(5) - 1], sorted[rank(95) - 1])
}

pub fn compute_thresholds(model: &LatentModel, xtrain: &PointSet) -> Result<ThresholdPair> {
    thresholds_from_latents(&predict_latent(model, xtrain)?)
}

/// Fraction of test labels matching the sign of the latent mean.
pub fn accuracy(model: &LatentModel, test: &LabeledDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("accuracy needs a non-empty test set"));
    }
    let latents = predict_latent(model, &test.x)?;
    Ok(fraction_correct(&latents, &test.y))
}

pub(crate) fn fraction_correct(latents: &[f64], labels: &[f64]) -> f64 {
    let hits = latents
        .iter()
        .zip(labels)
        .filter(|(f, y)| f64::from(label_of(**f)) == **y)
        .count();
    hits as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: &[Vec<f64>], y: &[f64]) -> LabeledDataset {
        LabeledDataset::new(PointSet::from_rows(rows).unwrap(), y.to_vec()).unwrap()
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> LabeledDataset {
        let x = PointSet::new(n, d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap();
        let mut y: Vec<f64> = (0..n)
            .map(|i| if x.row(i)[0] + 0.2 * rng.random::<f64>() > 0.6 { 1.0 } else { -1.0 })
            .collect();
        y[0] = 1.0;
        y[1] = -1.0;
        LabeledDataset::new(x, y).unwrap()
    }

    /// Damped fixed-point iteration of `f = k (t - sigma(f))` for one point.
    fn single_point_oracle(k: f64, label: f64) -> f64 {
        let t = 0.5 * (label + 1.0);
        let mut f = 0.0;
        for _ in 0..10_000 {
            f = 0.5 * f + 0.5 * k * (t - logistic(f));
        }
        f
    }

    #[test]
    fn laplace_single_point_matches_fixed_point() {
        // A lone point has one class only, so check the fixed point through
        // the oracle and the two-point symmetric case through the solver.
        let oracle = single_point_oracle(1.0, 1.0);
        assert!((oracle - 0.4).abs() < 0.01, "oracle {oracle}");
        assert!((oracle - (1.0 - logistic(oracle))).abs() < 1e-14);

        // Two far-apart points decouple: K ~ I, each mode is the lone-point one.
        let data = dataset(&[vec![0.0], vec![100.0]], &[1.0, -1.0]);
        let fit = fit_laplace(&data, &KernelSpec::new(1.0, 1.0).unwrap(), 1e-10, 100).unwrap();
        assert!((fit.f_hat[0] - oracle).abs() < 1e-9);
        assert!((fit.f_hat[1] + oracle).abs() < 1e-9);
    }

    #[test]
    fn laplace_antisymmetric_pair() {
        let data = dataset(&[vec![0.2, 0.3], vec![0.7, 0.6]], &[1.0, -1.0]);
        let fit = fit_laplace(&data, &KernelSpec::new(2.0, 0.5).unwrap(), 1e-10, 100).unwrap();
        assert!((fit.f_hat[0] + fit.f_hat[1]).abs() < 1e-10);
        assert!(fit.f_hat[0] > 0.0);
    }

    #[test]
    fn laplace_stationarity_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [5, 20, 60] {
            let data = random_dataset(&mut rng, n, 3);
            for spec in [
                KernelSpec::new(1.0, 0.5).unwrap(),
                KernelSpec::new(20.0, 2.0).unwrap(),
            ] {
                let fit = fit_laplace(&data, &spec, 1e-8, 100).unwrap();
                assert!(fit.final_gradient_norm < 1e-8);
                // independent check of K^-1 f = grad log p(y|f)
                let k = cross_covariance(&data.x, &data.x, &spec).unwrap();
                let f = DVector::from_column_slice(&fit.f_hat);
                let grad = DVector::from_iterator(
                    n,
                    data.y.iter().zip(&fit.f_hat).map(|(y, f)| 0.5 * (y + 1.0) - logistic(*f)),
                );
                let resid = (&k * &grad - &f).amax();
                assert!(resid < 1e-6 * spec.variance * n as f64, "resid {resid}");
            }
        }
    }

    #[test]
    fn laplace_rejects_single_class_and_bad_tol() {
        let data = dataset(&[vec![0.0], vec![1.0]], &[1.0, 1.0]);
        let spec = KernelSpec::new(1.0, 1.0).unwrap();
        assert!(fit_laplace(&data, &spec, 1e-8, 100).is_err());
        let data = dataset(&[vec![0.0], vec![1.0]], &[1.0, -1.0]);
        assert!(fit_laplace(&data, &spec, 0.0, 100).is_err());
        assert!(matches!(
            fit_laplace(&data, &spec, 1e-8, 0),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn regression_weight_examples() {
        let spec = KernelSpec::new(1.0, 1.0).unwrap();
        let x = PointSet::from_rows(&[vec![0.5]]).unwrap();
        let m = regression_weights(&x, &[2.0], &spec, 0.0).unwrap();
        assert!((m.alpha[0] - 2.0).abs() < 1e-7);
        assert!((m.latent(&[0.5]).unwrap() - 2.0).abs() < 1e-7);

        let m = regression_weights(&x, &[2.0], &spec, 1e12).unwrap();
        assert!(m.alpha[0].abs() < 1e-11);
        assert!(m.latent(&[0.3]).unwrap().abs() < 1e-11);
    }

    #[test]
    fn regression_interpolates_without_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = random_dataset(&mut rng, 12, 2);
        let spec = KernelSpec::new(1.0, 0.3).unwrap();
        let f_hat: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = regression_weights(&data.x, &f_hat, &spec, 0.0).unwrap();
        let pred = predict_latent(&m, &data.x).unwrap();
        // (K + jI) alpha = f, so K alpha misses f by exactly j * alpha
        let j = spec.default_jitter();
        for ((p, f), a) in pred.iter().zip(&f_hat).zip(&m.alpha) {
            assert!((p - (f - j * a)).abs() < 1e-9, "{p} vs {f}");
        }
    }

    #[test]
    fn regression_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = random_dataset(&mut rng, 6, 2);
        let spec = KernelSpec::new(1.0, 0.5).unwrap();
        let f_hat: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = regression_weights(&data.x, &f_hat, &spec, 0.01).unwrap();
        // dense oracle: LU inverse of K + sigma^2 I
        let mut k = cross_covariance(&data.x, &data.x, &spec).unwrap();
        for i in 0..6 {
            k[(i, i)] += 0.01 + spec.default_jitter();
        }
        let alpha = k.clone().lu().solve(&DVector::from_column_slice(&f_hat)).unwrap();
        let k0 = cross_covariance(&data.x, &data.x, &spec).unwrap();
        let oracle = &k0 * alpha;
        let pred = predict_latent(&m, &data.x).unwrap();
        for (p, o) in pred.iter().zip(oracle.iter()) {
            assert!((p - o).abs() < 1e-9, "{p} vs {o}");
        }
    }

    #[test]
    fn prediction_examples() {
        let spec = KernelSpec::new(0.7, 0.1).unwrap();
        let m = LatentModel::new(PointSet::from_rows(&[vec![0.4, 0.4]]).unwrap(), vec![1.0], spec, 0.0)
            .unwrap();
        assert_eq!(m.latent(&[0.4, 0.4]).unwrap(), 0.7);
        assert!(m.latent(&[10.0, 10.0]).unwrap().abs() < 1e-6);
        assert!(m.latent(&[1.0]).is_err());

        assert_eq!(logistic(0.0), 0.5);
        let z = (0.95f64 / 0.05).ln();
        assert!((z - 2.944).abs() < 1e-3);
        assert!((logistic(z) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn batch_prediction_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_dataset(&mut rng, 10, 3);
        let alpha: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = LatentModel::new(data.x.clone(), alpha, KernelSpec::new(1.3, 0.4).unwrap(), 0.0)
            .unwrap();
        let probes = random_dataset(&mut rng, 15, 3).x;
        let batch = predict_latent(&m, &probes).unwrap();
        let classes = predict_class(&m, &probes).unwrap();
        for (i, x) in probes.iter_rows().enumerate() {
            // elementwise summation oracle
            let oracle: f64 = (0..10)
                .map(|j| {
                    m.alpha[j]
                        * crate::kernel::eq_kernel(m.centers.row(j), x, &m.kernel).unwrap()
                })
                .sum();
            assert!((batch[i] - oracle).abs() < 1e-14);
            assert!(batch[i].abs() <= m.envelope());
            assert_eq!(classes[i].label, label_of(oracle));
            assert!(classes[i].probability > 0.0 && classes[i].probability < 1.0);
        }
    }

    #[test]
    fn gradient_symmetry_and_direction() {
        let spec = KernelSpec::new(1.0, 0.3).unwrap();
        let m = LatentModel::new(
            PointSet::from_rows(&[vec![0.2, 0.5], vec![0.8, 0.5]]).unwrap(),
            vec![1.5, 1.5],
            spec,
            0.0,
        )
        .unwrap();
        let g = latent_gradient(&m, &[0.5, 0.7]).unwrap();
        assert!(g[0].abs() < 1e-15);

        let single = LatentModel::new(
            PointSet::from_rows(&[vec![0.2, 0.5]]).unwrap(),
            vec![-2.0],
            spec,
            0.0,
        )
        .unwrap();
        let x = [0.6, 0.1];
        let g = latent_gradient(&single, &x).unwrap();
        // parallel to (c - x) * sign(alpha)
        let dir = [-(0.2 - 0.6), -(0.5 - 0.1)];
        let cross = g[0] * dir[1] - g[1] * dir[0];
        assert!(cross.abs() < 1e-15);
        assert!(g[0] * dir[0] + g[1] * dir[1] > 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let data = random_dataset(&mut rng, 8, 4);
        let alpha: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = LatentModel::new(data.x.clone(), alpha, KernelSpec::new(1.0, 0.5).unwrap(), 0.0)
            .unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let g = latent_gradient(&m, &x).unwrap();
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            for j in 0..4 {
                let h = 1e-5;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (m.latent(&xp).unwrap() - m.latent(&xm).unwrap()) / (2.0 * h);
                assert!((g[j] - fd).abs() <= 1e-5 * gnorm.max(1e-8));
            }
        }
    }

    #[test]
    fn threshold_examples() {
        let t = thresholds_from_latents(&[3.0, -1.0, 0.0, -3.0, 2.0, 1.0, -2.0]).unwrap();
        assert_eq!((t.f05, t.f95, t.gap), (-3.0, 3.0, 6.0));
        let t = thresholds_from_latents(&[0.5; 10]).unwrap();
        assert_eq!(t.gap, 0.0);
        assert!(thresholds_from_latents(&[1.0]).is_err());
        // N = 100: ranks 5 and 95 exactly
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let t = thresholds_from_latents(&v).unwrap();
        assert_eq!((t.f05, t.f95), (5.0, 95.0));
        // N = 20: ranks 1 and 19
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        let t = thresholds_from_latents(&v).unwrap();
        assert_eq!((t.f05, t.f95), (1.0, 19.0));
    }

    #[test]
    fn accuracy_examples() {
        let spec = KernelSpec::new(1.0, 0.1).unwrap();
        let data = dataset(&[vec![0.0], vec![1.0]], &[1.0, -1.0]);
        let m = LatentModel::new(data.x.clone(), vec![5.0, -5.0], spec, 0.0).unwrap();
        assert_eq!(accuracy(&m, &data).unwrap(), 1.0);
        let zero = LatentModel::new(data.x.clone(), vec![0.0, 0.0], spec, 0.0).unwrap();
        let balanced = dataset(&[vec![0.0], vec![1.0], vec![0.3], vec![0.6]], &[1.0, -1.0, 1.0, -1.0]);
        assert_eq!(accuracy(&zero, &balanced).unwrap(), 0.5);
        let empty = LabeledDataset::new(PointSet::empty(1), vec![]).unwrap();
        assert!(accuracy(&m, &empty).is_err());
    }

    #[test]
    fn dataset_validation() {
        let x = PointSet::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(LabeledDataset::new(x.clone(), vec![1.0]).is_err());
        assert!(LabeledDataset::new(x, vec![1.0, 0.0]).is_err());
    }
}
