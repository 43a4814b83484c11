//! Exponentiated-quadratic kernel, its gradient, Gram matrices and the
//! Cholesky-based solves that every fitting routine goes through.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};

/// Default jitter, as a multiple of the kernel variance, added to Gram
/// matrices before factorizing.
pub const DEFAULT_JITTER_FACTOR: f64 = 1e-8;

/// Isotropic EQ kernel `v * exp(-|a-b|^2 / (2 l^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub variance: f64,
    pub lengthscale: f64,
}

impl KernelSpec {
    pub fn new(variance: f64, lengthscale: f64) -> Result<Self> {
        let spec = KernelSpec {
            variance,
            lengthscale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance.is_finite() && self.variance > 0.0) {
            return Err(Error::invalid(format!(
                "kernel variance must be positive, got {}",
                self.variance
            )));
        }
        if !(self.lengthscale.is_finite() && self.lengthscale > 0.0) {
            return Err(Error::invalid(format!(
                "kernel lengthscale must be positive, got {}",
                self.lengthscale
            )));
        }
        Ok(())
    }

    /// `1 / (2 l^2)`, the factor multiplying squared distances in the exponent.
    #[inline]
    pub fn inv_two_l2(&self) -> f64 {
        0.5 / (self.lengthscale * self.lengthscale)
    }

    /// Kernel value from a precomputed squared distance.
    #[inline]
    pub fn from_sq_dist(&self, sq: f64) -> f64 {
        self.variance * (-sq * self.inv_two_l2()).exp()
    }

    pub fn default_jitter(&self) -> f64 {
        DEFAULT_JITTER_FACTOR * self.variance
    }
}

/// `N x D` point cloud stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    rows: usize,
    dims: usize,
    values: Vec<f64>,
}

impl PointSet {
    pub fn new(rows: usize, dims: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * dims {
            return Err(Error::invalid(format!(
                "point set of {rows}x{dims} needs {} values, got {}",
                rows * dims,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point set"));
        }
        Ok(PointSet { rows, dims, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dims);
        for r in rows {
            check_dims(dims, r.len())?;
            values.extend_from_slice(r);
        }
        PointSet::new(rows.len(), dims, values)
    }

    pub fn empty(dims: usize) -> Self {
        PointSet {
            rows: 0,
            dims,
            values: Vec::new(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> PointSet {
        let mut values = Vec::with_capacity(indices.len() * self.dims);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        PointSet {
            rows: indices.len(),
            dims: self.dims,
            values,
        }
    }

    /// Columns selected by index, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> PointSet {
        let mut values = Vec::with_capacity(self.rows * columns.len());
        for r in self.iter_rows() {
            values.extend(columns.iter().map(|&c| r[c]));
        }
        PointSet {
            rows: self.rows,
            dims: columns.len(),
            values,
        }
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[c]).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.dims, &self.values)
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn eq_kernel(a: &[f64], b: &[f64], spec: &KernelSpec) -> Result<f64> {
    check_dims(a.len(), b.len())?;
    Ok(spec.from_sq_dist(sq_dist(a, b)))
}

/// Gradient of `k(a, b)` with respect to `a`: `-(a - b) / l^2 * k(a, b)`.
pub fn eq_kernel_grad(a: &[f64], b: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    let k = eq_kernel(a, b, spec)?;
    let scale = -k / (spec.lengthscale * spec.lengthscale);
    Ok(a.iter().zip(b).map(|(x, y)| scale * (x - y)).collect())
}

/// `K[i, j] = k(A_i, B_j)`.
pub fn cross_covariance(a: &PointSet, b: &PointSet, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    check_dims(a.dims(), b.dims())?;
    let mut k = DMatrix::zeros(a.rows(), b.rows());
    for (i, ra) in a.iter_rows().enumerate() {
        for (j, rb) in b.iter_rows().enumerate() {
            k[(i, j)] = spec.from_sq_dist(sq_dist(ra, rb));
        }
    }
    Ok(k)
}

/// Squared distances between all rows of `a` and `b`.
pub fn sq_dist_matrix(a: &PointSet, b: &PointSet) -> Result<DMatrix<f64>> {
    check_dims(a.dims(), b.dims())?;
    Ok(DMatrix::from_fn(a.rows(), b.rows(), |i, j| {
        sq_dist(a.row(i), b.row(j))
    }))
}

/// Cholesky factor of `M + jitter I`, where the jitter actually applied may
/// have been escalated from the requested value.
pub struct PsdFactor {
    chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl PsdFactor {
    /// Factorizes `m + jitter I`, escalating the jitter by decades up to
    /// `1e-4 * trace / N` before giving up.
    pub fn new(m: &DMatrix<f64>, jitter: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid("PSD factorization needs a square matrix"));
        }
        if jitter < 0.0 || !jitter.is_finite() {
            return Err(Error::invalid(format!("jitter must be >= 0, got {jitter}")));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix to factorize"));
        }
        let n = m.nrows();
        if n == 0 {
            return Err(Error::invalid("cannot factorize an empty matrix"));
        }
        let mean_diag = (m.trace() / n as f64).abs();
        let cap = 1e-4 * mean_diag.max(f64::MIN_POSITIVE);
        let mut current = jitter;
        loop {
            let mut shifted = m.clone();
            for i in 0..n {
                shifted[(i, i)] += current;
            }
            if let Some(chol) = Cholesky::new(shifted) {
                let pivots_ok = (0..n).all(|i| {
                    let p = chol.l_dirty()[(i, i)];
                    p.is_finite() && p > 0.0
                });
                if pivots_ok {
                    return Ok(PsdFactor {
                        chol,
                        jitter: current,
                    });
                }
            }
            if current >= cap {
                return Err(Error::NotPositiveDefinite { jitter: current });
            }
            current = if current == 0.0 {
                (1e-12 * mean_diag).max(f64::MIN_POSITIVE)
            } else {
                (current * 10.0).min(cap)
            };
        }
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// Lower-triangular factor `L` with `L L^T = M + jitter I`.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// Solves `(M + jitter I) X = B` through a Cholesky factorization.
pub fn solve_psd(m: &DMatrix<f64>, b: &DMatrix<f64>, jitter: f64) -> Result<DMatrix<f64>> {
    check_dims(m.nrows(), b.nrows())?;
    Ok(PsdFactor::new(m, jitter)?.solve(b))
}

pub fn solve_psd_vec(m: &DMatrix<f64>, b: &DVector<f64>, jitter: f64) -> Result<DVector<f64>> {
    check_dims(m.nrows(), b.len())?;
    Ok(PsdFactor::new(m, jitter)?.solve_vec(b))
}
