//! L2-regularized logistic regression baseline.
//!
//! For a linear latent on inputs normalized to `[0, 1]`, changing input `j`
//! moves the latent by at most `|w_j|`, so summing the sorted `|w|` gives
//! the exact minimum number of inputs needed to cover the threshold gap.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bound::{cumulative_certificate, MinInputs};
use crate::error::{check_dims, Error, Result};
use crate::gp::{fraction_correct, thresholds_from_latents, LabeledDataset, ThresholdPair};
use crate::kernel::PointSet;

pub const DEFAULT_LR_TOL: f64 = 1e-8;
pub const DEFAULT_LR_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// `C`, the inverse regularization strength.
    pub inv_regularization: f64,
}

impl LinearModel {
    pub fn latent(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn latents(&self, x: &PointSet) -> Result<Vec<f64>> {
        check_dims(self.weights.len(), x.dims())?;
        Ok(x.iter_rows().map(|r| self.latent(r)).collect())
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `sum_i log(1 + exp(-y_i (b + w.x_i))) + |w|^2 / (2C)`.
pub fn lr_objective(data: &LabeledDataset, c: f64, weights: &[f64], bias: f64) -> f64 {
    let model = LinearModel {
        weights: weights.to_vec(),
        bias,
        inv_regularization: c,
    };
    let loss: f64 = data
        .x
        .iter_rows()
        .zip(&data.y)
        .map(|(x, y)| softplus(-y * model.latent(x)))
        .sum();
    loss + weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * c)
}

/// Damped Newton on the penalized log loss; the bias is unpenalized.
pub fn fit_lr(data: &LabeledDataset, c: f64, tol: f64, max_iter: usize) -> Result<LinearModel> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("C must be positive"));
    }
    if !data.has_both_classes() {
        return Err(Error::invalid("logistic regression needs both classes"));
    }
    let n = data.len();
    let d = data.dims();
    // design matrix with the bias as the last column
    let x = DMatrix::from_fn(n, d + 1, |i, j| if j < d { data.x.row(i)[j] } else { 1.0 });
    let y = DVector::from_column_slice(&data.y);
    let mut theta = DVector::zeros(d + 1);
    let penalty = 1.0 / c;
    let split = |t: &DVector<f64>| (t.rows(0, d).iter().copied().collect::<Vec<_>>(), t[d]);
    let mut objective = {
        let (w, b) = split(&theta);
        lr_objective(data, c, &w, b)
    };
    let mut grad_norm = f64::INFINITY;
    for iter in 0..max_iter {
        let z = &x * &theta;
        // d/dz log(1 + exp(-y z)) = -y sigma(-y z)
        let r = DVector::from_fn(n, |i, _| -y[i] * sigmoid(-y[i] * z[i]));
        let s = DVector::from_fn(n, |i, _| {
            let p = sigmoid(z[i]);
            p * (1.0 - p)
        });
        let mut grad = x.transpose() * &r;
        for j in 0..d {
            grad[j] += penalty * theta[j];
        }
        grad_norm = grad.amax();
        if grad_norm < tol {
            log::debug!("logistic regression converged after {iter} Newton steps");
            let (weights, bias) = split(&theta);
            return Ok(LinearModel {
                weights,
                bias,
                inv_regularization: c,
            });
        }
        let mut xs = x.clone();
        for i in 0..n {
            xs.row_mut(i).scale_mut(s[i]);
        }
        let mut h = x.transpose() * xs;
        for j in 0..d {
            h[(j, j)] += penalty;
        }
        // tiny ridge on the bias keeps separable data well posed
        h[(d, d)] += 1e-12;
        let step = h
            .cholesky()
            .ok_or_else(|| Error::invalid("logistic regression Hessian is not positive definite"))?
            .solve(&grad);
        let mut t = 1.0;
        loop {
            let cand = &theta - &step * t;
            let (w, b) = split(&cand);
            let obj = lr_objective(data, c, &w, b);
            if obj <= objective {
                theta = cand;
                objective = obj;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::NonConvergence {
                    solver: "logistic regression line search",
                    iterations: iter,
                    gradient_norm: grad_norm,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        solver: "logistic regression",
        iterations: max_iter,
        gradient_norm: grad_norm,
    })
}

pub fn lr_thresholds(model: &LinearModel, xtrain: &PointSet) -> Result<ThresholdPair> {
    thresholds_from_latents(&model.latents(xtrain)?)
}

/// Smallest number of inputs whose largest `|w_j|` sum to at least the gap.
pub fn lr_certified_min_inputs(model: &LinearModel, thresholds: &ThresholdPair) -> MinInputs {
    let abs: Vec<f64> = model.weights.iter().map(|w| w.abs()).collect();
    cumulative_certificate(&abs, thresholds.gap).2
}

/// [`lr_certified_min_inputs`] after checking the inputs span at most
/// `[0, 1]`, which the per-input change of `|w_j|` relies on.
pub fn lr_certify(model: &LinearModel, xtrain: &PointSet) -> Result<(ThresholdPair, MinInputs)> {
    if xtrain.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("LR certificate needs inputs normalized to [0, 1]"));
    }
    let th = lr_thresholds(model, xtrain)?;
    Ok((th, lr_certified_min_inputs(model, &th)))
}

pub fn lr_accuracy(model: &LinearModel, test: &LabeledDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("accuracy needs a non-empty test set"));
    }
    Ok(fraction_correct(&model.latents(&test.x)?, &test.y))
}
