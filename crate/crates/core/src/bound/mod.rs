//! The adversarial bound: a certified upper bound on how far the latent
//! function can move when a given input dimension is changed anywhere in
//! the unit hypercube.
//!
//! Along dimension `d` every centre contributes
//! `alpha_i v g_i(x_d) phi_i(x_perp)` with `g_i` a 1-D EQ and `phi_i` the EQ
//! over the remaining coordinates. The axis is cut into slices; for each
//! slice and centre the largest possible increase of `alpha_i v g_i` is
//! tabulated under the four constraints a path piece can meet (free at both
//! ends, pinned at the upper edge, pinned at the lower edge, crossing). A
//! path through a contiguous run of slices gets a per-centre weight by
//! summing these pieces, and the largest latent increase along any such
//! path is bounded by the supremum over `x_perp` of the mixture
//! `sum_i w_i phi_i(x_perp)`.

mod joint;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dims, Error, Result};
use crate::gp::{LatentModel, ThresholdPair};
use crate::kernel::PointSet;
use crate::mixture::{
    bounding_box, grid_upper_bound, pair_negatives, principal_frame, project_points, EqMixture,
    GridBoundConfig, GridTables, NegativeHandling,
};

pub use joint::{bound_joint_pair, bound_joint_pair_with, JointBound};

/// Partition of `[0, 1]` along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slicing {
    pub axis: usize,
    pub boundaries: Vec<f64>,
}

impl Slicing {
    pub fn new(axis: usize, boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::invalid("slicing needs at least two boundaries"));
        }
        if boundaries[0] != 0.0 || *boundaries.last().unwrap() != 1.0 {
            return Err(Error::invalid("slicing must span [0, 1]"));
        }
        if boundaries.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("slice boundaries must be strictly increasing"));
        }
        Ok(Slicing { axis, boundaries })
    }

    pub fn uniform(axis: usize, s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::invalid("need at least one slice"));
        }
        let mut b: Vec<f64> = (0..=s).map(|j| j as f64 / s as f64).collect();
        b[s] = 1.0;
        Slicing::new(axis, b)
    }

    pub fn num_slices(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn slice(&self, j: usize) -> (f64, f64) {
        (self.boundaries[j], self.boundaries[j + 1])
    }

    /// Splits every slice into `r` equal pieces.
    pub fn subdivide(&self, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("subdivision factor must be >= 1"));
        }
        let mut b = Vec::with_capacity(self.num_slices() * r + 1);
        for j in 0..self.num_slices() {
            let (lo, hi) = self.slice(j);
            for p in 0..r {
                b.push(lo + (hi - lo) * p as f64 / r as f64);
            }
        }
        b.push(1.0);
        Slicing::new(self.axis, b)
    }

    fn reflected(&self) -> Self {
        let mut b: Vec<f64> = self.boundaries.iter().rev().map(|v| 1.0 - v).collect();
        b[0] = 0.0;
        *b.last_mut().unwrap() = 1.0;
        Slicing {
            axis: self.axis,
            boundaries: b,
        }
    }
}

/// Constraint on a path piece `t0 <= t1` inside one slice `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// Start and finish anywhere in the slice.
    Free,
    /// Finish pinned at the upper edge (first slice of a longer run).
    EndAtUpper,
    /// Start pinned at the lower edge (last slice of a longer run).
    StartAtLower,
    /// Cross the whole slice.
    Crossing,
}

impl Constraint {
    pub const ALL: [Constraint; 4] = [
        Constraint::Free,
        Constraint::EndAtUpper,
        Constraint::StartAtLower,
        Constraint::Crossing,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Direction of travel along the sliced axis. `Reversed` is realized by
/// negating every weight: the largest increase when moving down the axis is
/// the largest increase of the negated latent when moving up it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reversed,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Forward, Direction::Reversed];

    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reversed => -1.0,
        }
    }
}

/// `max w (g(t1) - g(t0))` over `a <= t0 <= t1 <= b` under `constraint`,
/// with `g(t) = exp(-(t - c)^2 / (2 l^2))`.
pub fn segment_bound_1d(weight: f64, c: f64, l: f64, a: f64, b: f64, constraint: Constraint) -> Result<f64> {
    if !(a < b) {
        return Err(Error::invalid(format!("segment needs a < b, got [{a}, {b}]")));
    }
    if !(l > 0.0) {
        return Err(Error::invalid("segment lengthscale must be positive"));
    }
    let inv = 0.5 / (l * l);
    let g = |t: f64| (-(t - c) * (t - c) * inv).exp();
    let (ga, gb, gpeak) = (g(a), g(b), g(c.clamp(a, b)));
    let w = weight.abs();
    let v = if weight >= 0.0 {
        match constraint {
            Constraint::Free | Constraint::StartAtLower => w * (gpeak - ga),
            Constraint::EndAtUpper => w * (gb - ga).max(0.0),
            Constraint::Crossing => w * (gb - ga),
        }
    } else {
        match constraint {
            Constraint::Free | Constraint::EndAtUpper => w * (gpeak - gb),
            Constraint::StartAtLower => w * (ga - gb).max(0.0),
            Constraint::Crossing => w * (ga - gb),
        }
    };
    Ok(v)
}

/// Per-slice, per-centre segment bounds for one axis and direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentBoundTable {
    pub slicing: Slicing,
    pub direction: Direction,
    num_centers: usize,
    /// `values[j * M + i][constraint]`
    values: Vec<[f64; 4]>,
}

impl SegmentBoundTable {
    pub fn num_centers(&self) -> usize {
        self.num_centers
    }

    pub fn num_slices(&self) -> usize {
        self.slicing.num_slices()
    }

    pub fn value(&self, slice: usize, center: usize, constraint: Constraint) -> f64 {
        self.values[slice * self.num_centers + center][constraint.index()]
    }

    fn column(&self, slice: usize, constraint: Constraint) -> impl Iterator<Item = f64> + '_ {
        let m = self.num_centers;
        self.values[slice * m..(slice + 1) * m]
            .iter()
            .map(move |v| v[constraint.index()])
    }
}

fn table_from_coords(
    coords: &[f64],
    weights: &[f64],
    l: f64,
    slicing: &Slicing,
    direction: Direction,
) -> Result<SegmentBoundTable> {
    let m = coords.len();
    let mut values = Vec::with_capacity(slicing.num_slices() * m);
    for j in 0..slicing.num_slices() {
        let (a, b) = slicing.slice(j);
        for i in 0..m {
            let w = weights[i] * direction.sign();
            let mut entry = [0.0; 4];
            for c in Constraint::ALL {
                entry[c.index()] = segment_bound_1d(w, coords[i], l, a, b, c)?;
            }
            values.push(entry);
        }
    }
    Ok(SegmentBoundTable {
        slicing: slicing.clone(),
        direction,
        num_centers: m,
        values,
    })
}

/// Segment bounds with weight `alpha_i v` for every centre.
pub fn build_segment_table(model: &LatentModel, slicing: &Slicing, direction: Direction) -> Result<SegmentBoundTable> {
    if slicing.axis >= model.dims() {
        return Err(Error::DimensionMismatch {
            expected: model.dims(),
            got: slicing.axis + 1,
        });
    }
    let coords = model.centers.column(slicing.axis);
    let weights: Vec<f64> = model.alpha.iter().map(|a| a * model.kernel.variance).collect();
    table_from_coords(&coords, &weights, model.kernel.lengthscale, slicing, direction)
}

/// Per-centre weight of a path entering at slice `start` and leaving at
/// slice `end`.
pub fn path_weights(table: &SegmentBoundTable, start: usize, end: usize) -> Result<Vec<f64>> {
    let s = table.num_slices();
    if start > end || end >= s {
        return Err(Error::invalid(format!("bad slice run {start}..={end} for {s} slices")));
    }
    if start == end {
        return Ok(table.column(start, Constraint::Free).collect());
    }
    let mut w: Vec<f64> = table.column(start, Constraint::EndAtUpper).collect();
    for j in start + 1..end {
        for (acc, v) in w.iter_mut().zip(table.column(j, Constraint::Crossing)) {
            *acc += v;
        }
    }
    for (acc, v) in w.iter_mut().zip(table.column(end, Constraint::StartAtLower)) {
        *acc += v;
    }
    Ok(w)
}

/// Upper bounds on `sup_x sum_i w_i phi_i(x)` over the coordinates that are
/// not being perturbed, for many weight vectors over the same centres.
///
/// The projection onto principal axes and the grid box are fixed from all
/// centres, independent of the weights, so in clamp mode the bound is
/// monotone in every weight.
pub(crate) struct PerpBounder {
    centers: PointSet,
    lengthscale: f64,
    cfg: GridBoundConfig,
    frame: Option<(Vec<f64>, nalgebra::DMatrix<f64>)>,
    tables: Option<GridTables>,
}

impl PerpBounder {
    pub(crate) fn new(model: &LatentModel, excluded: &[usize], cfg: &GridBoundConfig) -> Result<Self> {
        cfg.validate()?;
        let keep: Vec<usize> = (0..model.dims()).filter(|d| !excluded.contains(d)).collect();
        let centers = model.centers.select_columns(&keep);
        let lengthscale = model.kernel.lengthscale;
        if keep.is_empty() {
            return Ok(PerpBounder {
                centers,
                lengthscale,
                cfg: *cfg,
                frame: None,
                tables: None,
            });
        }
        let (mean, axes) = principal_frame(&centers, cfg.pca_dims)?;
        let projected = project_points(&centers, &mean, &axes)?;
        let (lo, hi) = bounding_box(&projected);
        let tables = GridTables::new(&projected, &lo, &hi, cfg.grid_points_per_axis, lengthscale)?;
        Ok(PerpBounder {
            centers,
            lengthscale,
            cfg: *cfg,
            frame: Some((mean, axes)),
            tables: Some(tables),
        })
    }

    pub(crate) fn bound(&self, weights: &[f64]) -> Result<f64> {
        self.bound_above(weights, f64::NEG_INFINITY)
    }

    /// Like [`bound`](Self::bound), but when the clamped bound is already at
    /// most `floor` it is returned without pairing. Callers that only keep
    /// a running maximum at least `floor` get the same result.
    pub(crate) fn bound_above(&self, weights: &[f64], floor: f64) -> Result<f64> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("path weights"));
        }
        let (Some((mean, axes)), Some(tables)) = (&self.frame, &self.tables) else {
            // no remaining coordinates: every term is the constant w_i
            return Ok(weights.iter().sum::<f64>().max(0.0));
        };
        let clamped: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
        let clamp_bound = tables.bound(&clamped);
        match self.cfg.negatives {
            NegativeHandling::Clamp => Ok(clamp_bound),
            NegativeHandling::Pair => {
                if clamp_bound <= floor || weights.iter().all(|&w| w >= 0.0) {
                    return Ok(clamp_bound);
                }
                let mix = EqMixture::new(self.centers.clone(), weights.to_vec(), self.lengthscale)?;
                let paired = pair_negatives(&mix, self.cfg.pair_tolerance, self.cfg.safety_inflation)?;
                if paired.is_empty() {
                    return Ok(0.0);
                }
                let projected = project_points(&paired.centers, mean, axes)?;
                let (lo, hi) = bounding_box(&projected);
                let proj_mix = EqMixture::new(projected, paired.weights, self.lengthscale)?;
                let pair_bound = grid_upper_bound(&proj_mix, &lo, &hi, self.cfg.grid_points_per_axis)?;
                Ok(pair_bound.min(clamp_bound))
            }
        }
    }
}

/// Bound for one contiguous run of slices in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceBound {
    pub direction: Direction,
    pub start: usize,
    pub end: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionBound {
    pub dim: usize,
    pub slicing: Slicing,
    /// `max(0, max over sequences)`.
    pub bound: f64,
    pub sequences: Vec<SequenceBound>,
}

fn sequence_bounds(
    table: &SegmentBoundTable,
    bounder: &PerpBounder,
    out: &mut Vec<SequenceBound>,
) -> Result<()> {
    let s = table.num_slices();
    for start in 0..s {
        for end in start..s {
            let w = path_weights(table, start, end)?;
            out.push(SequenceBound {
                direction: table.direction,
                start,
                end,
                bound: bounder.bound(&w)?,
            });
        }
    }
    Ok(())
}

/// `B_d`: an upper bound on `|f(x') - f(x)|` over all `x, x'` in the unit
/// hypercube that differ only in coordinate `d_hat`.
pub fn bound_dimension(model: &LatentModel, d_hat: usize, s: usize, cfg: &GridBoundConfig) -> Result<DimensionBound> {
    bound_dimension_with(model, &Slicing::uniform(d_hat, s)?, cfg)
}

pub fn bound_dimension_with(model: &LatentModel, slicing: &Slicing, cfg: &GridBoundConfig) -> Result<DimensionBound> {
    let d_hat = slicing.axis;
    if d_hat >= model.dims() {
        return Err(Error::invalid(format!("dimension {d_hat} out of range for {} inputs", model.dims())));
    }
    let bounder = PerpBounder::new(model, &[d_hat], cfg)?;
    let mut sequences = Vec::new();
    for direction in Direction::BOTH {
        let table = build_segment_table(model, slicing, direction)?;
        sequence_bounds(&table, &bounder, &mut sequences)?;
    }
    let bound = sequences.iter().fold(0.0f64, |acc, q| acc.max(q.bound));
    Ok(DimensionBound {
        dim: d_hat,
        slicing: slicing.clone(),
        bound,
        sequences,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhanceConfig {
    /// Sequences refined per direction.
    pub top_k: usize,
    /// Target number of slices across the whole axis; each coarse slice of
    /// a selected sequence is split into `ceil(fine_slices / s)` pieces.
    pub fine_slices: usize,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        EnhanceConfig {
            top_k: 100,
            fine_slices: 24,
        }
    }
}

/// Tightens a coarse result by re-bounding its largest sequences with finer
/// slices.
///
/// A path counted by coarse sequence `(J, K)` starts in slice `J` and ends
/// in slice `K`, so it is counted by some fine sequence starting in a piece
/// of `J` and ending in a piece of `K`; the maximum over those fine
/// sequences is a bound for `(J, K)`. Each refined sequence keeps the
/// smaller of its coarse and refined bounds, and sequences that were not
/// selected keep their coarse bound.
pub fn enhance(
    model: &LatentModel,
    coarse: &DimensionBound,
    top_k: usize,
    fine_slices: usize,
    cfg: &GridBoundConfig,
) -> Result<f64> {
    let s = coarse.slicing.num_slices();
    if fine_slices < s {
        return Err(Error::invalid(format!(
            "enhancement needs at least as many fine slices ({fine_slices}) as coarse ones ({s})"
        )));
    }
    let r = fine_slices.div_ceil(s);
    let fine = coarse.slicing.subdivide(r)?;
    let bounder = PerpBounder::new(model, &[coarse.dim], cfg)?;
    let mut best = 0.0f64;
    for direction in Direction::BOTH {
        let mut seqs: Vec<SequenceBound> = coarse.sequences.iter().copied().filter(|q| q.direction == direction).collect();
        // stable: ties keep enumeration order
        seqs.sort_by(|a, b| b.bound.total_cmp(&a.bound));
        let table = build_segment_table(model, &fine, direction)?;
        for (rank, q) in seqs.iter().enumerate() {
            if rank >= top_k {
                best = best.max(q.bound);
                continue;
            }
            let mut refined = f64::NEG_INFINITY;
            for a in q.start * r..(q.start + 1) * r {
                for b in (q.end * r).max(a)..(q.end + 1) * r {
                    let v = bounder.bound_above(&path_weights(&table, a, b)?, refined.max(best))?;
                    refined = refined.max(v);
                }
            }
            best = best.max(refined.min(q.bound));
        }
    }
    Ok(best)
}

/// Smallest number of perturbed inputs the bound allows to close the gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinInputs {
    Count(usize),
    /// Even perturbing every input cannot close the gap.
    UnboundedSafe,
}

impl MinInputs {
    pub fn count(self) -> Option<usize> {
        match self {
            MinInputs::Count(n) => Some(n),
            MinInputs::UnboundedSafe => None,
        }
    }
}

impl std::fmt::Display for MinInputs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MinInputs::Count(n) => write!(f, "{n}"),
            MinInputs::UnboundedSafe => f.write_str("unbounded-safe"),
        }
    }
}

impl Serialize for MinInputs {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MinInputs::Count(n) => ser.serialize_u64(*n as u64),
            MinInputs::UnboundedSafe => ser.serialize_str("unbounded-safe"),
        }
    }
}

impl<'de> Deserialize<'de> for MinInputs {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Count(n) => Ok(MinInputs::Count(n as usize)),
            Raw::Text(t) if t == "unbounded-safe" => Ok(MinInputs::UnboundedSafe),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad min-inputs value {t:?}"))),
        }
    }
}

/// Dimensions sorted by decreasing bound (ties by index), the cumulative
/// sums in that order and the resulting input count.
pub fn cumulative_certificate(bounds: &[f64], gap: f64) -> (Vec<usize>, Vec<f64>, MinInputs) {
    let mut order: Vec<usize> = (0..bounds.len()).collect();
    order.sort_by(|&a, &b| bounds[b].total_cmp(&bounds[a]));
    let mut acc = 0.0;
    let cumulative: Vec<f64> = order
        .iter()
        .map(|&d| {
            acc += bounds[d];
            acc
        })
        .collect();
    let min_inputs = if gap <= 0.0 {
        MinInputs::Count(0)
    } else {
        match cumulative.iter().position(|&c| c >= gap) {
            Some(i) => MinInputs::Count(i + 1),
            None => MinInputs::UnboundedSafe,
        }
    };
    (order, cumulative, min_inputs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub slices: usize,
    pub mixture: GridBoundConfig,
    pub enhance: Option<EnhanceConfig>,
    /// Evaluate dimensions sequentially.
    pub strict_deterministic: bool,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            slices: 4,
            mixture: GridBoundConfig::default(),
            enhance: None,
            strict_deterministic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateResult {
    /// `B_d` for every input, after enhancement when enabled.
    pub per_dim_bounds: Vec<f64>,
    pub coarse_bounds: Vec<f64>,
    /// Dimensions by decreasing bound.
    pub order: Vec<usize>,
    pub sorted_cumulative: Vec<f64>,
    pub thresholds: ThresholdPair,
    /// No perturbation of fewer inputs can move any latent by the gap.
    pub certified_min_inputs: MinInputs,
    pub settings: CertifyConfig,
    pub elapsed_seconds: f64,
}

/// Bounds for every input dimension and the resulting certificate.
pub fn certify(model: &LatentModel, thresholds: &ThresholdPair, cfg: &CertifyConfig) -> Result<CertificateResult> {
    let start = Instant::now();
    if cfg.slices == 0 {
        return Err(Error::invalid("need at least one slice"));
    }
    cfg.mixture.validate()?;
    let one = |d: usize| -> Result<(f64, f64)> {
        let coarse = bound_dimension(model, d, cfg.slices, &cfg.mixture)?;
        let refined = match &cfg.enhance {
            Some(e) => enhance(model, &coarse, e.top_k, e.fine_slices.max(cfg.slices), &cfg.mixture)?,
            None => coarse.bound,
        };
        Ok((coarse.bound, refined))
    };
    let dims = model.dims();
    let results: Vec<(f64, f64)> = if cfg.strict_deterministic {
        (0..dims).map(one).collect::<Result<_>>()?
    } else {
        (0..dims).into_par_iter().map(one).collect::<Result<_>>()?
    };
    let coarse_bounds: Vec<f64> = results.iter().map(|r| r.0).collect();
    let per_dim_bounds: Vec<f64> = results.iter().map(|r| r.1).collect();
    let (order, sorted_cumulative, certified_min_inputs) = cumulative_certificate(&per_dim_bounds, thresholds.gap);
    log::info!(
        "certified {dims} inputs in {:.2}s; min inputs {certified_min_inputs}",
        start.elapsed().as_secs_f64()
    );
    Ok(CertificateResult {
        per_dim_bounds,
        coarse_bounds,
        order,
        sorted_cumulative,
        thresholds: *thresholds,
        certified_min_inputs,
        settings: *cfg,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

pub(crate) fn check_model_dims(model: &LatentModel, dims: &[usize]) -> Result<()> {
    for &d in dims {
        if d >= model.dims() {
            return Err(Error::invalid(format!("dimension {d} out of range for {} inputs", model.dims())));
        }
    }
    check_dims(model.alpha.len(), model.centers.rows())
}
