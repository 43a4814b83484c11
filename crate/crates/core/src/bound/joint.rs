//! Bounds for perturbations that touch two inputs together.
//!
//! Any change of inputs `d1` and `d2` can be realized endpoint to endpoint
//! by an L-shaped path: a monotone run along the first axis, then one along
//! the second. On the first leg the second coordinate is fixed inside the
//! slice where the second leg starts; on the second leg the first
//! coordinate is fixed inside the slice where the first leg ends. Each
//! leg's per-centre weights are scaled by the range of the other axis' 1-D
//! EQ over that slice, and the summed weights go through the same
//! perpendicular mixture bound as the single-input case.

use serde::{Deserialize, Serialize};

use super::{
    bound_dimension, check_model_dims, enhance, path_weights, table_from_coords, Direction, EnhanceConfig, PerpBounder,
    Slicing,
};
use crate::error::{Error, Result};
use crate::gp::LatentModel;
use crate::mixture::GridBoundConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointBound {
    /// Reported bound: `min(l_path, single_sum)`.
    pub bound: f64,
    /// Smaller of the two leg orders.
    pub l_path: f64,
    /// `B_d1 + B_d2` at the same slicing.
    pub single_sum: f64,
}

/// A monotone run along one axis, slice indices in original (unreflected)
/// order.
struct Leg {
    start: usize,
    end: usize,
    weights: Vec<f64>,
}

/// All runs along `axis` for latent sign `sign` with travel up the axis
/// (`up`) or down it (realized by reflecting the axis).
fn legs(model: &LatentModel, axis: usize, slicing: &Slicing, sign: f64, up: bool) -> Result<Vec<Leg>> {
    let l = model.kernel.lengthscale;
    let weights: Vec<f64> = model.alpha.iter().map(|a| sign * a * model.kernel.variance).collect();
    let mut coords = model.centers.column(axis);
    let s = slicing.num_slices();
    let table = if up {
        table_from_coords(&coords, &weights, l, slicing, Direction::Forward)?
    } else {
        coords.iter_mut().for_each(|c| *c = 1.0 - *c);
        table_from_coords(&coords, &weights, l, &slicing.reflected(), Direction::Forward)?
    };
    let map = |j: usize| if up { j } else { s - 1 - j };
    let mut out = Vec::with_capacity(s * (s + 1) / 2);
    for a in 0..s {
        for b in a..s {
            out.push(Leg {
                start: map(a),
                end: map(b),
                weights: path_weights(&table, a, b)?,
            });
        }
    }
    Ok(out)
}

/// `(min, max)` of each centre's 1-D EQ over each slice: `[slice][centre]`.
fn eq_ranges(model: &LatentModel, axis: usize, slicing: &Slicing) -> Vec<Vec<(f64, f64)>> {
    let inv = model.kernel.inv_two_l2();
    let coords = model.centers.column(axis);
    (0..slicing.num_slices())
        .map(|j| {
            let (a, b) = slicing.slice(j);
            coords
                .iter()
                .map(|&c| {
                    let g = |t: f64| (-(t - c) * (t - c) * inv).exp();
                    (g(a).min(g(b)), g(c.clamp(a, b)))
                })
                .collect()
        })
        .collect()
}

fn scaled(w: f64, range: (f64, f64)) -> f64 {
    if w >= 0.0 {
        w * range.1
    } else {
        w * range.0
    }
}

/// Leg lists for every latent sign and travel direction, indexed by
/// `2 * sign_index + up_index`.
fn all_legs(model: &LatentModel, axis: usize, slicing: &Slicing) -> Result<Vec<Vec<Leg>>> {
    let mut out = Vec::with_capacity(4);
    for sign in [1.0, -1.0] {
        for up in [true, false] {
            out.push(legs(model, axis, slicing, sign, up)?);
        }
    }
    Ok(out)
}

struct Combo {
    bound: f64,
    sign: usize,
    up_a: usize,
    up_b: usize,
    a: usize,
    b: usize,
}

fn combo_weights(la: &Leg, lb: &Leg, r1: &[Vec<(f64, f64)>], r2: &[Vec<(f64, f64)>], w: &mut [f64]) {
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = scaled(la.weights[i], r2[lb.start][i]) + scaled(lb.weights[i], r1[la.end][i]);
    }
}

/// Largest L-path bound with legs along `first` then `second`. With
/// `refine = Some((top_k, r))` the `top_k` largest leg combinations are
/// re-bounded with every slice cut into `r` pieces: a path counted by a
/// coarse combination starts and ends each leg inside the same coarse
/// slices, so some fine combination whose legs start and end in pieces of
/// those slices counts it too.
fn l_path_bound(
    model: &LatentModel,
    first: usize,
    second: usize,
    s: usize,
    refine: Option<(usize, usize)>,
    bounder: &PerpBounder,
) -> Result<f64> {
    let s1 = Slicing::uniform(first, s)?;
    let s2 = Slicing::uniform(second, s)?;
    let r1 = eq_ranges(model, first, &s1);
    let r2 = eq_ranges(model, second, &s2);
    let legs_a = all_legs(model, first, &s1)?;
    let legs_b = all_legs(model, second, &s2)?;
    let m = model.num_centers();
    let mut w = vec![0.0; m];
    let mut combos = Vec::new();
    let mut running = f64::NEG_INFINITY;
    for sign in 0..2 {
        for up_a in 0..2 {
            for up_b in 0..2 {
                for (a, la) in legs_a[2 * sign + up_a].iter().enumerate() {
                    for (b, lb) in legs_b[2 * sign + up_b].iter().enumerate() {
                        combo_weights(la, lb, &r1, &r2, &mut w);
                        // without refinement only the maximum is needed
                        let floor = if refine.is_some() { f64::NEG_INFINITY } else { running };
                        let bound = bounder.bound_above(&w, floor)?;
                        running = running.max(bound);
                        combos.push(Combo {
                            bound,
                            sign,
                            up_a,
                            up_b,
                            a,
                            b,
                        });
                    }
                }
            }
        }
    }
    let coarse_max = combos.iter().map(|c| c.bound).fold(0.0, f64::max);
    let Some((top_k, r)) = refine else {
        return Ok(coarse_max);
    };
    // stable: ties keep enumeration order
    combos.sort_by(|x, y| y.bound.total_cmp(&x.bound));
    let f1 = s1.subdivide(r)?;
    let f2 = s2.subdivide(r)?;
    let fr1 = eq_ranges(model, first, &f1);
    let fr2 = eq_ranges(model, second, &f2);
    let fine_a = all_legs(model, first, &f1)?;
    let fine_b = all_legs(model, second, &f2)?;
    let mut best = combos.get(top_k).map_or(0.0, |c| c.bound);
    for c in combos.iter().take(top_k) {
        let la = &legs_a[2 * c.sign + c.up_a][c.a];
        let lb = &legs_b[2 * c.sign + c.up_b][c.b];
        let inside = |fine: &Leg, coarse: &Leg| fine.start / r == coarse.start && fine.end / r == coarse.end;
        let fa: Vec<&Leg> = fine_a[2 * c.sign + c.up_a].iter().filter(|f| inside(f, la)).collect();
        let fb: Vec<&Leg> = fine_b[2 * c.sign + c.up_b].iter().filter(|f| inside(f, lb)).collect();
        let mut refined = f64::NEG_INFINITY;
        for pa in &fa {
            for pb in &fb {
                combo_weights(pa, pb, &fr1, &fr2, &mut w);
                refined = refined.max(bounder.bound_above(&w, refined.max(best))?);
            }
        }
        best = best.max(refined.min(c.bound));
    }
    Ok(best)
}

/// Upper bound on `|f(x') - f(x)|` over all `x, x'` in the unit hypercube
/// that differ only in inputs `d1` and `d2`.
///
/// Either leg order realizes every such change, so each order alone gives
/// a bound and the smaller is kept. The result never exceeds
/// `B_d1 + B_d2`, which is itself a bound.
pub fn bound_joint_pair(model: &LatentModel, d1: usize, d2: usize, s: usize, cfg: &GridBoundConfig) -> Result<JointBound> {
    bound_joint_pair_with(model, d1, d2, s, None, cfg)
}

/// [`bound_joint_pair`] with optional refinement of the largest leg
/// combinations; the single-input bounds are enhanced with the same
/// settings.
pub fn bound_joint_pair_with(
    model: &LatentModel,
    d1: usize,
    d2: usize,
    s: usize,
    enhance_cfg: Option<&EnhanceConfig>,
    cfg: &GridBoundConfig,
) -> Result<JointBound> {
    if d1 == d2 {
        return Err(Error::invalid("joint bound needs two distinct dimensions"));
    }
    check_model_dims(model, &[d1, d2])?;
    let bounder = PerpBounder::new(model, &[d1, d2], cfg)?;
    let refine = match enhance_cfg {
        Some(e) if e.fine_slices < s => {
            return Err(Error::invalid(format!(
                "enhancement needs at least as many fine slices ({}) as coarse ones ({s})",
                e.fine_slices
            )))
        }
        Some(e) => Some((e.top_k, e.fine_slices.div_ceil(s))),
        None => None,
    };
    let forward = l_path_bound(model, d1, d2, s, refine, &bounder)?;
    let backward = l_path_bound(model, d2, d1, s, refine, &bounder)?;
    let l_path = forward.min(backward);
    let single = |d: usize| -> Result<f64> {
        let coarse = bound_dimension(model, d, s, cfg)?;
        match enhance_cfg {
            Some(e) => enhance(model, &coarse, e.top_k, e.fine_slices, cfg),
            None => Ok(coarse.bound),
        }
    };
    let single_sum = single(d1)? + single(d2)?;
    Ok(JointBound {
        bound: l_path.min(single_sum),
        l_path,
        single_sum,
    })
}
