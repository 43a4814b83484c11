//! Rigorous upper bounds on the global maximum of a sum of isotropic EQs
//! with signed weights.
//!
//! The pipeline has three sound stages:
//!
//! 1. Each negative component is absorbed into its nearest positive one. A
//!    pair `P g(t) - N g(t - delta)` restricted to the line through both
//!    centres is dominated by a single EQ placed at its peak, and every line
//!    parallel to it carries the same profile scaled, so the replacement
//!    dominates in the full space.
//! 2. Positive centres are projected onto their top principal axes. An
//!    orthogonal projection never increases distances, so the projected
//!    mixture evaluated at the projection of `x` is at least the original
//!    mixture at `x`.
//! 3. The low-dimensional mixture is evaluated on a grid covering the
//!    bounding box of its centres. The maximum of a nonnegative isotropic
//!    mixture lies in the convex hull of the centres and, by Jensen's
//!    inequality at the stationary point, is at most the best grid value
//!    times `exp(r^2 / (2 l^2))` where `r` is the half-diagonal of a cell.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::kernel::{sq_dist, PointSet};

/// Weighted sum of EQs `sum_i w_i exp(-|x - c_i|^2 / (2 l^2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqMixture {
    pub centers: PointSet,
    pub weights: Vec<f64>,
    pub lengthscale: f64,
}

impl EqMixture {
    pub fn new(centers: PointSet, weights: Vec<f64>, lengthscale: f64) -> Result<Self> {
        check_dims(centers.rows(), weights.len())?;
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::invalid("mixture lengthscale must be positive"));
        }
        Ok(EqMixture {
            centers,
            weights,
            lengthscale,
        })
    }

    pub fn dims(&self) -> usize {
        self.centers.dims()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let inv = 0.5 / (self.lengthscale * self.lengthscale);
        self.centers
            .iter_rows()
            .zip(&self.weights)
            .map(|(c, w)| w * (-sq_dist(c, x) * inv).exp())
            .sum()
    }
}

/// How negative-weight components are made nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeHandling {
    /// Absorb each negative EQ into its nearest positive one.
    Pair,
    /// Drop negative components.
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBoundConfig {
    pub grid_points_per_axis: usize,
    pub pca_dims: usize,
    /// Bisection tolerance for pair peaks, in lengthscale units.
    pub pair_tolerance: f64,
    /// Relative inflation applied to every pair peak value.
    pub safety_inflation: f64,
    pub negatives: NegativeHandling,
}

impl Default for GridBoundConfig {
    fn default() -> Self {
        GridBoundConfig {
            grid_points_per_axis: 64,
            pca_dims: 2,
            pair_tolerance: 1e-12,
            safety_inflation: 1e-9,
            negatives: NegativeHandling::Pair,
        }
    }
}

impl GridBoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_axis < 2 {
            return Err(Error::invalid("grid_points_per_axis must be >= 2"));
        }
        if self.pca_dims < 1 {
            return Err(Error::invalid("pca_dims must be >= 1"));
        }
        if !(self.pair_tolerance > 0.0) || !(self.safety_inflation >= 0.0) {
            return Err(Error::invalid("pair tolerance must be > 0 and inflation >= 0"));
        }
        Ok(())
    }
}

/// Peak of `P g(t) - N g(t - delta)` with `g(t) = exp(-t^2 / (2 l^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairPeak {
    /// Location (offset from the positive centre towards the negative one)
    /// and inflated value of the maximum.
    Peak { x0: f64, y0: f64 },
    /// The pair is nowhere positive; both components can be dropped.
    Dominated,
}

/// Locates the global maximum of a positive/negative EQ pair.
///
/// Works in lengthscale units `u = t / l`, writing the profile as
/// `exp(-u^2 / 2) * (P - N exp(u d - d^2 / 2))` so that neither the value
/// nor the stationarity condition underflow far from the centres. The
/// maximum always lies at `u <= 0`; the scan window is widened to the left
/// until the derivative is positive at its edge.
pub fn find_pair_peak(
    p: f64,
    n: f64,
    delta: f64,
    l: f64,
    tol: f64,
    inflation: f64,
) -> Result<PairPeak> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::invalid(format!("positive weight must be > 0, got {p}")));
    }
    if !(n >= 0.0 && n.is_finite() && delta >= 0.0 && delta.is_finite() && l > 0.0) {
        return Err(Error::invalid("pair peak needs N >= 0, delta >= 0, l > 0"));
    }
    let scale = 1.0 + inflation;
    if n == 0.0 {
        return Ok(PairPeak::Peak { x0: 0.0, y0: p * scale });
    }
    let d = delta / l;
    if d == 0.0 {
        return Ok(if n < p {
            PairPeak::Peak {
                x0: 0.0,
                y0: (p - n) * scale,
            }
        } else {
            PairPeak::Dominated
        });
    }
    let e = |u: f64| (u * d - 0.5 * d * d).exp();
    // f(u) = exp(-u^2/2) h(u); f'(u) has the sign of q(u).
    let h = |u: f64| p - n * e(u);
    let q = |u: f64| -u * p + n * e(u) * (u - d);
    let value = |u: f64| (-0.5 * u * u).exp() * h(u);

    let mut lo = -3.0;
    while q(lo) <= 0.0 {
        lo *= 2.0;
        if lo < -1e8 {
            return Ok(PairPeak::Dominated);
        }
    }
    let hi = d + 3.0;
    const SCAN: usize = 1024;
    let step = (hi - lo) / (SCAN - 1) as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut prev_u = lo;
    let mut prev_q = q(lo);
    for i in 1..SCAN {
        let u = if i == SCAN - 1 { hi } else { lo + step * i as f64 };
        let qu = q(u);
        if prev_q > 0.0 && qu <= 0.0 {
            // bracketed maximum: bisect
            let (mut a, mut b) = (prev_u, u);
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if q(mid) > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let root = 0.5 * (a + b);
            let v = value(root);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((root, v));
            }
        }
        prev_u = u;
        prev_q = qu;
    }
    match best {
        Some((u, v)) if v > 0.0 => Ok(PairPeak::Peak {
            x0: u * l,
            y0: v * scale,
        }),
        _ => Ok(PairPeak::Dominated),
    }
}

/// Replaces negative components by pairing each with its nearest unused
/// positive component.
///
/// Negatives are processed in decreasing `|w|`. Each positive partner is
/// used at most once; negatives left without a partner are dropped, which
/// only raises the mixture. The result has nonnegative weights and
/// dominates the input pointwise.
pub fn pair_negatives(mix: &EqMixture, tol: f64, inflation: f64) -> Result<EqMixture> {
    if mix.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("mixture weights"));
    }
    let dims = mix.dims();
    let mut negatives: Vec<usize> = (0..mix.len()).filter(|&i| mix.weights[i] < 0.0).collect();
    if negatives.is_empty() {
        return Ok(mix.clone());
    }
    negatives.sort_by(|&a, &b| mix.weights[a].total_cmp(&mix.weights[b]));
    let positives: Vec<usize> = (0..mix.len()).filter(|&i| mix.weights[i] > 0.0).collect();
    let mut used = vec![false; positives.len()];
    let mut replacements: Vec<(Vec<f64>, f64)> = Vec::new();

    for &ni in &negatives {
        let cn = mix.centers.row(ni);
        let mut partner: Option<(usize, f64)> = None;
        for (slot, &pi) in positives.iter().enumerate() {
            if used[slot] {
                continue;
            }
            let dist = sq_dist(cn, mix.centers.row(pi));
            if partner.is_none_or(|(_, best)| dist < best) {
                partner = Some((slot, dist));
            }
        }
        let Some((slot, dist2)) = partner else {
            continue;
        };
        used[slot] = true;
        let pi = positives[slot];
        let cp = mix.centers.row(pi);
        let delta = dist2.sqrt();
        match find_pair_peak(
            mix.weights[pi],
            -mix.weights[ni],
            delta,
            mix.lengthscale,
            tol,
            inflation,
        )? {
            PairPeak::Peak { x0, y0 } => {
                let center = if delta > 0.0 {
                    cp.iter().zip(cn).map(|(p, n)| p + x0 / delta * (n - p)).collect()
                } else {
                    cp.to_vec()
                };
                replacements.push((center, y0));
            }
            PairPeak::Dominated => {}
        }
    }

    let mut values = Vec::new();
    let mut weights = Vec::new();
    for (slot, &pi) in positives.iter().enumerate() {
        if !used[slot] {
            values.extend_from_slice(mix.centers.row(pi));
            weights.push(mix.weights[pi]);
        }
    }
    for (c, w) in replacements {
        values.extend(c);
        weights.push(w);
    }
    EqMixture::new(
        PointSet::new(weights.len(), dims, values)?,
        weights,
        mix.lengthscale,
    )
}

/// Result of projecting a nonnegative mixture onto principal axes.
#[derive(Debug, Clone)]
pub struct ProjectedMixture {
    pub mixture: EqMixture,
    pub mean: Vec<f64>,
    /// `d x k` matrix with orthonormal columns.
    pub axes: DMatrix<f64>,
}

impl ProjectedMixture {
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let k = self.axes.ncols();
        (0..k)
            .map(|j| {
                x.iter()
                    .zip(&self.mean)
                    .enumerate()
                    .map(|(i, (xi, mi))| (xi - mi) * self.axes[(i, j)])
                    .sum()
            })
            .collect()
    }
}

/// Appends orthonormalized copies of `candidates` to `axes` until it has
/// `k` columns.
fn complete_basis(mut axes: Vec<DVector<f64>>, candidates: &[usize], d: usize, k: usize) -> Vec<DVector<f64>> {
    for &c in candidates {
        if axes.len() >= k {
            break;
        }
        let mut v = DVector::zeros(d);
        v[c] = 1.0;
        for a in &axes {
            let proj = a.dot(&v);
            v -= a * proj;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            axes.push(v / norm);
        }
    }
    axes
}

/// Top-`k` principal axes of an unweighted point cloud.
///
/// Returns `(mean, axes)` with `axes` a `d x k` matrix with orthonormal
/// columns. When the cloud has rank below `k` the axes are completed with
/// coordinate axes of greatest variance. For `k >= d` the frame is the
/// identity with a zero mean, so coordinates pass through unchanged.
pub fn principal_frame(points: &PointSet, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = points.dims();
    if k == 0 {
        return Err(Error::invalid("principal frame needs k >= 1"));
    }
    if k >= d {
        return Ok((vec![0.0; d], DMatrix::identity(d, d)));
    }
    let m = points.rows();
    let mean = centroid(points);
    let centered = DMatrix::from_fn(m, d, |r, c| points.row(r)[c] - mean[c]);
    let col_var: Vec<f64> = (0..d).map(|c| centered.column(c).norm_squared()).collect();
    let mut variance_order: Vec<usize> = (0..d).collect();
    variance_order.sort_by(|&a, &b| col_var[b].total_cmp(&col_var[a]));

    let principal: Vec<DVector<f64>> = if m <= d {
        // Gram route: eigenvectors v of C C^T map to axes C^T v / sqrt(lambda).
        let gram = &centered * centered.transpose();
        principal_axes(&gram, |v, lambda| centered.transpose() * v / lambda.sqrt(), k)
    } else {
        let cov = centered.transpose() * &centered;
        principal_axes(&cov, |v, _| v.clone_owned(), k)
    };
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(k);
    for mut v in principal {
        for a in &ortho {
            let proj = a.dot(&v);
            v -= a * proj;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            ortho.push(v / norm);
        }
    }
    if ortho.len() < k {
        log::debug!("centre cloud has rank {} < {k}; padding with coordinate axes", ortho.len());
    }
    let axes = complete_basis(ortho, &variance_order, d, k);
    Ok((mean, DMatrix::from_columns(&axes)))
}

/// Applies `x -> (x - mean) axes` to every row.
pub fn project_points(points: &PointSet, mean: &[f64], axes: &DMatrix<f64>) -> Result<PointSet> {
    check_dims(points.dims(), mean.len())?;
    check_dims(points.dims(), axes.nrows())?;
    let k = axes.ncols();
    let mut values = Vec::with_capacity(points.rows() * k);
    for row in points.iter_rows() {
        for j in 0..k {
            values.push(row.iter().zip(mean).enumerate().map(|(i, (x, m))| (x - m) * axes[(i, j)]).sum());
        }
    }
    PointSet::new(points.rows(), k, values)
}

/// Projects the positive components of `mix` onto the top-`k` principal
/// axes of their (unweighted) centres.
pub fn reduce_pca(mix: &EqMixture, k: usize) -> Result<ProjectedMixture> {
    if mix.weights.iter().any(|&w| w < 0.0) {
        return Err(Error::invalid("PCA reduction needs nonnegative weights"));
    }
    let d = mix.dims();
    if k == 0 || k > d {
        return Err(Error::invalid(format!("PCA needs 1 <= k <= d, got k = {k}, d = {d}")));
    }
    let keep: Vec<usize> = (0..mix.len()).filter(|&i| mix.weights[i] > 0.0).collect();
    let kept = mix.centers.select_rows(&keep);
    let (mean, axes) = if k == d {
        // still centre the cloud so the projected box is well placed
        (centroid(&kept), DMatrix::identity(d, d))
    } else {
        principal_frame(&kept, k)?
    };
    let centers = project_points(&kept, &mean, &axes)?;
    Ok(ProjectedMixture {
        mixture: EqMixture::new(centers, keep.iter().map(|&i| mix.weights[i]).collect(), mix.lengthscale)?,
        mean,
        axes,
    })
}

fn centroid(points: &PointSet) -> Vec<f64> {
    let mut mean = vec![0.0; points.dims()];
    for row in points.iter_rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    if points.rows() > 0 {
        mean.iter_mut().for_each(|v| *v /= points.rows() as f64);
    }
    mean
}

fn principal_axes<F>(sym: &DMatrix<f64>, to_axis: F, k: usize) -> Vec<DVector<f64>>
where
    F: Fn(&DVector<f64>, f64) -> DVector<f64>,
{
    if sym.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    order
        .into_iter()
        .take(k)
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * top && eig.eigenvalues[i] > 0.0)
        .map(|i| to_axis(&eig.eigenvectors.column(i).clone_owned(), eig.eigenvalues[i]))
        .collect()
}

/// Per-axis EQ factor tables for a fixed set of centres on a fixed grid.
///
/// Evaluating `sum_i w_i exp(-|node - c_i|^2 / (2 l^2))` on every node then
/// costs one matrix product per 2-d slab, and the tables can be reused for
/// any nonnegative weight vector over the same centres.
#[derive(Debug, Clone)]
pub struct GridTables {
    /// `factors[j]` is `nodes_j x M`.
    factors: Vec<DMatrix<f64>>,
    /// `r^2 / (2 l^2)` for the half-diagonal `r` of a grid cell.
    log_correction: f64,
}

impl GridTables {
    /// Axes with zero width get a single node. Centres must lie in the box.
    pub fn new(centers: &PointSet, lo: &[f64], hi: &[f64], points_per_axis: usize, lengthscale: f64) -> Result<Self> {
        let k = centers.dims();
        check_dims(k, lo.len())?;
        check_dims(k, hi.len())?;
        if points_per_axis < 2 {
            return Err(Error::invalid("grid needs at least 2 points per axis"));
        }
        for (r, c) in centers.iter_rows().enumerate() {
            for j in 0..k {
                if !(c[j] >= lo[j] && c[j] <= hi[j]) {
                    return Err(Error::invalid(format!("centre {r} lies outside the grid box")));
                }
            }
        }
        let inv = 0.5 / (lengthscale * lengthscale);
        let m = centers.rows();
        let mut r2 = 0.0;
        let factors = (0..k)
            .map(|j| {
                let width = hi[j] - lo[j];
                let nodes = if width > 0.0 { points_per_axis } else { 1 };
                let spacing = if nodes > 1 { width / (nodes - 1) as f64 } else { 0.0 };
                r2 += 0.25 * spacing * spacing;
                DMatrix::from_fn(nodes, m, |a, i| {
                    let t = if a + 1 == nodes && nodes > 1 { hi[j] } else { lo[j] + spacing * a as f64 };
                    let diff = t - centers.row(i)[j];
                    (-diff * diff * inv).exp()
                })
            })
            .collect();
        Ok(GridTables {
            factors,
            log_correction: r2 * inv,
        })
    }

    pub fn num_centers(&self) -> usize {
        self.factors.first().map_or(0, DMatrix::ncols)
    }

    /// Largest mixture value over the grid nodes.
    pub fn max_value(&self, weights: &[f64]) -> f64 {
        let m = weights.len();
        debug_assert!(self.factors.is_empty() || self.num_centers() == m);
        let w = DVector::from_column_slice(weights);
        match self.factors.len() {
            0 => w.sum(),
            1 => (&self.factors[0] * &w).max(),
            _ => {
                // Outer loop over nodes of axes >= 2, inner 2-d slab by a matrix product.
                let outer: Vec<usize> = self.factors[2..].iter().map(DMatrix::nrows).collect();
                let total: usize = outer.iter().product();
                let mut best = f64::NEG_INFINITY;
                let mut idx = vec![0usize; outer.len()];
                let mut scaled = self.factors[0].clone();
                for _ in 0..total {
                    let mut wk = w.clone();
                    for (axis, &node) in idx.iter().enumerate() {
                        for i in 0..m {
                            wk[i] *= self.factors[axis + 2][(node, i)];
                        }
                    }
                    scaled.copy_from(&self.factors[0]);
                    for i in 0..m {
                        scaled.column_mut(i).scale_mut(wk[i]);
                    }
                    let slab = &scaled * self.factors[1].transpose();
                    best = best.max(slab.max());
                    for (axis, node) in idx.iter_mut().enumerate() {
                        *node += 1;
                        if *node < outer[axis] {
                            break;
                        }
                        *node = 0;
                    }
                }
                best
            }
        }
    }

    /// Inflated grid maximum; an upper bound on the supremum for
    /// nonnegative weights.
    pub fn bound(&self, weights: &[f64]) -> f64 {
        if weights.is_empty() {
            return 0.0;
        }
        self.max_value(weights).max(0.0) * self.log_correction.exp()
    }
}

/// Grid search bound for a nonnegative mixture whose centres lie in
/// `[lo, hi]`. Axes with zero width get a single node.
pub fn grid_upper_bound(mix: &EqMixture, lo: &[f64], hi: &[f64], points_per_axis: usize) -> Result<f64> {
    if mix.weights.iter().any(|&w| w < 0.0) {
        return Err(Error::invalid("grid bound needs nonnegative weights"));
    }
    let tables = GridTables::new(&mix.centers, lo, hi, points_per_axis, mix.lengthscale)?;
    Ok(tables.bound(&mix.weights))
}

/// Upper bound on `sup_x mix(x)` over all of space.
///
/// Returns 0 when nothing positive survives the negative-weight handling,
/// which is valid because the supremum of a nonpositive mixture is at most
/// 0.
pub fn upper_bound_mixture(mix: &EqMixture, cfg: &GridBoundConfig) -> Result<f64> {
    cfg.validate()?;
    if mix.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("mixture weights"));
    }
    let d = mix.dims();
    if d == 0 {
        // Every component is the constant w_i.
        return Ok(mix.weights.iter().sum::<f64>().max(0.0));
    }
    let nonneg = match cfg.negatives {
        NegativeHandling::Pair => pair_negatives(mix, cfg.pair_tolerance, cfg.safety_inflation)?,
        NegativeHandling::Clamp => {
            let keep: Vec<usize> = (0..mix.len()).filter(|&i| mix.weights[i] > 0.0).collect();
            EqMixture::new(
                mix.centers.select_rows(&keep),
                keep.iter().map(|&i| mix.weights[i]).collect(),
                mix.lengthscale,
            )?
        }
    };
    if !nonneg.weights.iter().any(|&w| w > 0.0) {
        return Ok(0.0);
    }
    let k = cfg.pca_dims.min(d);
    let projected = reduce_pca(&nonneg, k)?.mixture;
    let (lo, hi) = bounding_box(&projected.centers);
    grid_upper_bound(&projected, &lo, &hi, cfg.grid_points_per_axis)
}

pub fn bounding_box(points: &PointSet) -> (Vec<f64>, Vec<f64>) {
    let d = points.dims();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in points.iter_rows() {
        for j in 0..d {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mixture(rows: &[Vec<f64>], w: &[f64], l: f64) -> EqMixture {
        EqMixture::new(PointSet::from_rows(rows).unwrap(), w.to_vec(), l).unwrap()
    }

    fn peak(p: f64, n: f64, delta: f64, l: f64) -> PairPeak {
        find_pair_peak(p, n, delta, l, 1e-12, 1e-9).unwrap()
    }

    /// Dense grid maximum of the pair profile on [lo, hi].
    fn dense_pair_max(p: f64, n: f64, delta: f64, l: f64, lo: f64, hi: f64, pts: usize) -> (f64, f64) {
        let g = |t: f64| (-t * t / (2.0 * l * l)).exp();
        (0..pts)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (pts - 1) as f64;
                (t, p * g(t) - n * g(t - delta))
            })
            .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
    }

    #[test]
    fn pair_peak_trivial_cases() {
        assert_eq!(peak(2.0, 0.0, 1.0, 1.0), PairPeak::Peak { x0: 0.0, y0: 2.0 * (1.0 + 1e-9) });
        match peak(2.0, 0.5, 0.0, 1.0) {
            PairPeak::Peak { x0, y0 } => {
                assert_eq!(x0, 0.0);
                assert!((y0 - 1.5 * (1.0 + 1e-9)).abs() < 1e-15);
            }
            PairPeak::Dominated => panic!("co-located pair with N < P has a peak"),
        }
        assert_eq!(peak(1.0, 1.0, 0.0, 1.0), PairPeak::Dominated);
        assert!(find_pair_peak(0.0, 1.0, 1.0, 1.0, 1e-12, 0.0).is_err());
    }

    #[test]
    fn pair_peak_far_negative_is_negligible() {
        match peak(1.0, 0.5, 20.0, 1.0) {
            PairPeak::Peak { x0, y0 } => {
                assert!(x0.abs() < 1e-6);
                assert!((y0 - 1.0).abs() < 1e-8);
            }
            PairPeak::Dominated => panic!(),
        }
    }

    #[test]
    fn pair_peak_matches_dense_grid() {
        let (tg, vg) = dense_pair_max(1.0, 0.5, 1.0, 1.0, -6.0, 4.0, 1_000_001);
        match peak(1.0, 0.5, 1.0, 1.0) {
            PairPeak::Peak { x0, y0 } => {
                assert!((x0 - tg).abs() < 2e-5, "{x0} vs {tg}");
                assert!(y0 >= vg);
                assert!(y0 - vg < 1e-8);
                // stationarity of the uninflated profile
                let l: f64 = 1.0;
                let fp = -x0 * (-x0 * x0 / 2.0).exp() + 0.5 * (x0 - 1.0) * (-(x0 - 1.0f64).powi(2) / 2.0).exp();
                assert!(fp.abs() < 1e-12 / l);
            }
            PairPeak::Dominated => panic!(),
        }
    }

    #[test]
    fn pair_peak_far_left_when_negative_dominates() {
        // N >> P with close centres pushes the peak hundreds of lengthscales out.
        match peak(1.0, 100.0, 0.01, 1.0) {
            PairPeak::Peak { x0, y0 } => {
                assert!(x0 < -100.0);
                assert!(y0 >= 0.0);
            }
            PairPeak::Dominated => {}
        }
        // Moderately dominated pair still has a left peak found by widening.
        match peak(1.0, 3.0, 0.5, 1.0) {
            PairPeak::Peak { x0, y0 } => {
                let (tg, vg) = dense_pair_max(1.0, 3.0, 0.5, 1.0, -20.0, 5.0, 2_000_001);
                assert!((x0 - tg).abs() < 1e-4);
                assert!(y0 >= vg);
            }
            PairPeak::Dominated => panic!(),
        }
    }

    #[test]
    fn pair_replacement_dominates_on_line() {
        let mix = mixture(&[vec![0.0], vec![1.0]], &[1.0, -0.5], 1.0);
        let paired = pair_negatives(&mix, 1e-12, 1e-9).unwrap();
        assert_eq!(paired.len(), 1);
        for i in 0..100_000 {
            let t = -10.0 + 20.0 * i as f64 / 99_999.0;
            assert!(paired.eval(&[t]) >= mix.eval(&[t]), "t = {t}");
        }
    }

    #[test]
    fn pairing_without_negatives_is_identity() {
        let mix = mixture(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[1.0, 0.5], 0.7);
        assert_eq!(pair_negatives(&mix, 1e-12, 1e-9).unwrap(), mix);
    }

    #[test]
    fn unpaired_negatives_are_dropped() {
        let mix = mixture(&[vec![0.0], vec![1.0], vec![2.0]], &[1.0, -0.5, -0.4], 1.0);
        let paired = pair_negatives(&mix, 1e-12, 1e-9).unwrap();
        assert_eq!(paired.len(), 1);
        assert!(paired.weights.iter().all(|&w| w > 0.0));
        let all_neg = mixture(&[vec![0.0], vec![1.0]], &[-1.0, -0.5], 1.0);
        assert!(pair_negatives(&all_neg, 1e-12, 1e-9).unwrap().is_empty());
        let bad = mixture(&[vec![0.0]], &[f64::NAN], 1.0);
        assert!(pair_negatives(&bad, 1e-12, 1e-9).is_err());
    }

    #[test]
    fn pca_full_rank_preserves_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let mix = mixture(&rows, &[1.0; 6], 0.5);
        let p = reduce_pca(&mix, 3).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let a = sq_dist(mix.centers.row(i), mix.centers.row(j));
                let b = sq_dist(p.mixture.centers.row(i), p.mixture.centers.row(j));
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pca_collinear_centres_preserve_line_values() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| {
            let t = i as f64 * 0.2;
            vec![t, 2.0 * t, 0.5 - t]
        }).collect();
        let mix = mixture(&rows, &[1.0, 0.3, 0.8, 0.2, 0.6], 0.4);
        let p = reduce_pca(&mix, 1).unwrap();
        for i in 0..50 {
            let t = -0.5 + 2.0 * i as f64 / 49.0;
            let x = [t, 2.0 * t, 0.5 - t];
            let a = mix.eval(&x);
            let b = p.mixture.eval(&p.project(&x));
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pca_reduction_dominates_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..10).map(|_| rng.random::<f64>()).collect()).collect();
        let w: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let mix = mixture(&rows, &w, 0.6);
        let p = reduce_pca(&mix, 2).unwrap();
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..10).map(|_| rng.random_range(-0.5..1.5)).collect();
            assert!(p.mixture.eval(&p.project(&x)) >= mix.eval(&x) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn pca_degenerate_and_invalid() {
        let mix = mixture(&[vec![0.3, 0.3, 0.3], vec![0.3, 0.3, 0.3]], &[1.0, 2.0], 1.0);
        let p = reduce_pca(&mix, 2).unwrap();
        assert!(p.mixture.centers.values().iter().all(|v| v.abs() < 1e-15));
        assert_eq!(p.axes.ncols(), 2);
        let neg = mixture(&[vec![0.0]], &[-1.0], 1.0);
        assert!(reduce_pca(&neg, 1).is_err());
        assert!(reduce_pca(&mix, 4).is_err());
    }

    #[test]
    fn grid_bound_examples() {
        let l = 0.5;
        let single = mixture(&[vec![0.0, 0.0], vec![1.0, 1.0]], &[1.0, 0.0], l);
        let b = grid_upper_bound(&single, &[0.0, 0.0], &[1.0, 1.0], 11).unwrap();
        let r2 = 2.0 * 0.25 * 0.01;
        assert!((b - (r2 / (2.0 * l * l)).exp()).abs() < 1e-12);
        assert!(b >= 1.0);
        let twin = mixture(&[vec![0.4, 0.6], vec![0.4, 0.6]], &[1.0, 1.0], l);
        assert!(grid_upper_bound(&twin, &[0.4, 0.6], &[0.4, 0.6], 8).unwrap() >= 2.0);
        let empty = EqMixture::new(PointSet::empty(2), vec![], l).unwrap();
        assert_eq!(grid_upper_bound(&empty, &[0.0, 0.0], &[1.0, 1.0], 8).unwrap(), 0.0);
        assert!(grid_upper_bound(&twin, &[0.0, 0.0], &[0.1, 0.1], 8).is_err());
    }

    /// Max of a 2-d mixture over a `res x res` grid on `[lo, hi]^2`, via
    /// separable per-axis tables.
    fn dense_grid_max_2d(mix: &EqMixture, lo: f64, hi: f64, res: usize) -> f64 {
        let inv = 0.5 / (mix.lengthscale * mix.lengthscale);
        let node = |a: usize| lo + (hi - lo) * a as f64 / (res - 1) as f64;
        let m = mix.len();
        let ax = DMatrix::from_fn(res, m, |a, i| {
            let d = node(a) - mix.centers.row(i)[0];
            mix.weights[i] * (-d * d * inv).exp()
        });
        let ay = DMatrix::from_fn(m, res, |i, b| {
            let d = node(b) - mix.centers.row(i)[1];
            (-d * d * inv).exp()
        });
        (ax * ay).max()
    }

    #[test]
    fn grid_bound_beats_dense_oracle_in_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..100 {
            let m = 30;
            let rows: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
            let w: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let l = rng.random_range(0.05..0.5);
            let mix = mixture(&rows, &w, l);
            let (lo, hi) = bounding_box(&mix.centers);
            let bound = grid_upper_bound(&mix, &lo, &hi, 16).unwrap();
            let oracle = dense_grid_max_2d(&mix, 0.0, 1.0, 2000);
            assert!(bound >= oracle, "trial {trial}: {bound} < {oracle}");
        }
    }

    #[test]
    fn signed_mixture_bound_beats_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = GridBoundConfig::default();
        for trial in 0..100 {
            let d = 1 + trial % 3;
            let m = rng.random_range(1..=50);
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
            let w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let l = rng.random_range(0.05..0.6);
            let mix = mixture(&rows, &w, l);
            let bound = upper_bound_mixture(&mix, &cfg).unwrap();
            let res: usize = match d {
                1 => 20_001,
                2 => 301,
                _ => 41,
            };
            let mut idx = vec![0usize; d];
            let mut x = vec![0.0; d];
            let mut oracle = f64::NEG_INFINITY;
            for _ in 0..res.pow(d as u32) {
                for j in 0..d {
                    x[j] = -0.5 + 2.0 * idx[j] as f64 / (res - 1) as f64;
                }
                oracle = oracle.max(mix.eval(&x));
                for v in idx.iter_mut() {
                    *v += 1;
                    if *v < res {
                        break;
                    }
                    *v = 0;
                }
            }
            assert!(bound >= oracle, "trial {trial} (d = {d}, m = {m}): {bound} < {oracle}");
        }
    }

    #[test]
    fn doubling_grid_resolution_does_not_loosen() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
            let w: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
            let mix = mixture(&rows, &w, rng.random_range(0.1..0.5));
            let (lo, hi) = bounding_box(&mix.centers);
            let mut prev = grid_upper_bound(&mix, &lo, &hi, 8).unwrap();
            for s in [16, 32, 64] {
                let next = grid_upper_bound(&mix, &lo, &hi, s).unwrap();
                assert!(next <= prev * (1.0 + 1e-9), "s = {s}: {next} > {prev}");
                prev = next;
            }
        }
    }

    #[test]
    fn pair_dominance_in_random_signed_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let d = rng.random_range(1..=4);
            let m = rng.random_range(2..=12);
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
            let w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mix = mixture(&rows, &w, rng.random_range(0.1..0.6));
            let paired = pair_negatives(&mix, 1e-12, 1e-9).unwrap();
            assert!(paired.weights.iter().all(|&v| v > 0.0));
            for _ in 0..100_000 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..2.0)).collect();
                assert!(paired.eval(&x) >= mix.eval(&x) - 1e-12);
            }
        }
    }

    #[test]
    fn grid_bound_three_dims_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..7).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let w: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
        let mix = mixture(&rows, &w, 0.3);
        let (lo, hi) = bounding_box(&mix.centers);
        let s = 9;
        let bound = grid_upper_bound(&mix, &lo, &hi, s).unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut r2 = 0.0;
        let sp: Vec<f64> = (0..3).map(|j| (hi[j] - lo[j]) / (s - 1) as f64).collect();
        for v in &sp {
            r2 += 0.25 * v * v;
        }
        for a in 0..s {
            for b in 0..s {
                for c in 0..s {
                    let x = [lo[0] + sp[0] * a as f64, lo[1] + sp[1] * b as f64, lo[2] + sp[2] * c as f64];
                    best = best.max(mix.eval(&x));
                }
            }
        }
        let direct = best * (r2 / (2.0 * 0.09)).exp();
        assert!((bound - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn full_pipeline_examples() {
        let cfg = GridBoundConfig::default();
        let neg = mixture(&[vec![0.0, 0.0], vec![1.0, 0.0]], &[-1.0, -2.0], 0.5);
        assert_eq!(upper_bound_mixture(&neg, &cfg).unwrap(), 0.0);
        let single = mixture(&[vec![0.3, 0.9]], &[3.0], 0.5);
        let b = upper_bound_mixture(&single, &cfg).unwrap();
        assert!(b >= 3.0 && b <= 3.0 * (1.0 + 1e-9));
        let zero_d = EqMixture::new(PointSet::new(2, 0, vec![]).unwrap(), vec![1.0, -0.25], 1.0).unwrap();
        assert_eq!(upper_bound_mixture(&zero_d, &cfg).unwrap(), 0.75);
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = GridBoundConfig::default();
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..12).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
            let w: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mix = mixture(&rows, &w, 0.4);
            let lambda = rng.random_range(0.1..10.0);
            let scaled = mixture(&rows, &w.iter().map(|v| v * lambda).collect::<Vec<_>>(), 0.4);
            let a = upper_bound_mixture(&mix, &cfg).unwrap();
            let b = upper_bound_mixture(&scaled, &cfg).unwrap();
            assert!((b - lambda * a).abs() <= 1e-9 * b.abs().max(1e-300));
        }
    }
}
