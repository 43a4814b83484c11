//! Dataset generation, ingestion, normalization and input filtering.
//!
//! Every loader returns coordinates in `[0, 1]` and labels in `{-1, +1}`.
//! Splits and shuffles use a seeded ChaCha generator, so a spec and seed
//! identify a dataset exactly.

mod mnist;
mod synthetic;
mod uci;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gp::LabeledDataset;
use crate::kernel::PointSet;

pub use mnist::{downsample, load_mnist, read_idx_images, read_idx_labels, ClassSpec, IdxImages};
pub use synthetic::{gen_three_clusters_8d, gen_two_gaussians_3d};
pub use uci::{load_uci, parse_uci, UciName};

/// Default range threshold for image pixels: 50 grey levels.
pub const IMAGE_FILTER_THRESHOLD: f64 = 50.0 / 255.0;
/// Default range threshold for tabular inputs.
pub const TABULAR_FILTER_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DatasetSource {
    #[serde(rename = "synthetic_two_gaussians_3d")]
    SyntheticTwoGaussians3d,
    #[serde(rename = "synthetic_three_clusters_8d")]
    SyntheticThreeClusters8d,
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        resolution: usize,
        classes: ClassSpec,
    },
    Uci {
        name: UciName,
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub source: DatasetSource,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the per-source default range threshold.
    #[serde(default)]
    pub filter_threshold: Option<f64>,
    /// Take equal numbers of each class for training.
    #[serde(default)]
    pub balanced_train: bool,
}

/// Indices into the raw input space that survive filtering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub kept_dims: Vec<usize>,
    pub raw_dims: usize,
}

impl FeatureMask {
    pub fn apply(&self, data: &LabeledDataset) -> LabeledDataset {
        data.select_columns(&self.kept_dims)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub mask: FeatureMask,
    pub fingerprint: String,
}

/// Keeps inputs whose training range exceeds `threshold`.
pub fn filter_low_variance(x_train: &PointSet, threshold: f64) -> Result<FeatureMask> {
    let d = x_train.dims();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in x_train.iter_rows() {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let kept_dims: Vec<usize> = (0..d).filter(|&j| hi[j] - lo[j] > threshold).collect();
    if kept_dims.is_empty() {
        return Err(Error::Dataset(format!(
            "no input has a training range above {threshold}; nothing left to classify"
        )));
    }
    Ok(FeatureMask { kept_dims, raw_dims: d })
}

/// Per-column `(min, max)` of the training split.
pub fn min_max(x: &PointSet) -> Vec<(f64, f64)> {
    (0..x.dims())
        .map(|j| {
            x.iter_rows()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r[j]), b.max(r[j])))
        })
        .collect()
}

/// Maps each column to `[0, 1]` with the given ranges, clipping values
/// outside them. Constant columns map to 0.
pub fn normalize_with(x: &PointSet, ranges: &[(f64, f64)]) -> PointSet {
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, &(lo, hi)) in out.row_mut(i).iter_mut().zip(ranges) {
            *v = if hi > lo { ((*v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
        }
    }
    out
}

/// Seeded split of `labels.len()` items into train and test index lists.
pub(crate) fn split_indices(
    labels: &[f64],
    n_train: usize,
    n_test: usize,
    seed: u64,
    balanced: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::Dataset("train and test sizes must be at least 1".into()));
    }
    if n_train + n_test > labels.len() {
        return Err(Error::Dataset(format!(
            "requested {} points but only {} are available",
            n_train + n_test,
            labels.len()
        )));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let train: Vec<usize> = if balanced {
        let half = n_train / 2;
        let mut neg = order.iter().copied().filter(|&i| labels[i] < 0.0).take(n_train - half).collect::<Vec<_>>();
        let pos: Vec<usize> = order.iter().copied().filter(|&i| labels[i] > 0.0).take(half).collect();
        if neg.len() + pos.len() < n_train {
            return Err(Error::Dataset("not enough points of each class for a balanced split".into()));
        }
        neg.extend(pos);
        // restore shuffled order
        let rank: std::collections::HashMap<usize, usize> = order.iter().enumerate().map(|(r, &i)| (i, r)).collect();
        neg.sort_by_key(|i| rank[i]);
        neg
    } else {
        order[..n_train].to_vec()
    };
    let in_train: std::collections::HashSet<usize> = train.iter().copied().collect();
    let test: Vec<usize> = order.iter().copied().filter(|i| !in_train.contains(i)).take(n_test).collect();
    if test.len() < n_test {
        return Err(Error::Dataset("not enough points left for the test split".into()));
    }
    Ok((train, test))
}

/// SHA-256 over the shapes, coordinates and labels of both splits.
pub fn fingerprint(train: &LabeledDataset, test: &LabeledDataset) -> String {
    let mut h = Sha256::new();
    for part in [train, test] {
        h.update((part.x.rows() as u64).to_le_bytes());
        h.update((part.x.dims() as u64).to_le_bytes());
        for v in part.x.values() {
            h.update(v.to_le_bytes());
        }
        for y in &part.y {
            h.update(y.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads or generates the dataset described by `spec`.
pub fn load(spec: &DatasetSpec) -> Result<LoadedDataset> {
    let (train, test, default_threshold) = match &spec.source {
        DatasetSource::SyntheticTwoGaussians3d => {
            synthetic_split(gen_two_gaussians_3d(spec.seed, even(spec.n_train + spec.n_test)?)?, spec)?
        }
        DatasetSource::SyntheticThreeClusters8d => {
            synthetic_split(gen_three_clusters_8d(spec.seed, spec.n_train + spec.n_test)?, spec)?
        }
        DatasetSource::Mnist {
            images,
            labels,
            resolution,
            classes,
        } => {
            let (train, test) = load_mnist(
                images,
                labels,
                *resolution,
                *classes,
                spec.n_train,
                spec.n_test,
                spec.seed,
                spec.balanced_train,
            )?;
            (train, test, IMAGE_FILTER_THRESHOLD)
        }
        DatasetSource::Uci { name, path } => {
            let (train, test) = load_uci(*name, path, spec.n_train, spec.n_test, spec.seed, spec.balanced_train)?;
            (train, test, TABULAR_FILTER_THRESHOLD)
        }
    };
    let mask = filter_low_variance(&train.x, spec.filter_threshold.unwrap_or(default_threshold))?;
    let train = mask.apply(&train);
    let test = mask.apply(&test);
    let fingerprint = fingerprint(&train, &test);
    log::info!(
        "dataset: {} train, {} test, {} of {} inputs kept",
        train.len(),
        test.len(),
        mask.kept_dims.len(),
        mask.raw_dims
    );
    Ok(LoadedDataset {
        train,
        test,
        mask,
        fingerprint,
    })
}

fn even(n: usize) -> Result<usize> {
    Ok(n + n % 2)
}

fn synthetic_split(all: LabeledDataset, spec: &DatasetSpec) -> Result<(LabeledDataset, LabeledDataset, f64)> {
    let (tr, te) = split_indices(&all.y, spec.n_train, spec.n_test, spec.seed ^ 0x5eed, spec.balanced_train)?;
    Ok((all.select_rows(&tr), all.select_rows(&te), TABULAR_FILTER_THRESHOLD))
}
