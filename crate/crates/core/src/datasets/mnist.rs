//! IDX ingestion and block-average down-sampling of 28×28 digit images.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use super::split_indices;
use crate::error::{Error, Result};
use crate::gp::LabeledDataset;
use crate::kernel::PointSet;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
const SIDE: usize = 28;

/// Which digits form the two classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ClassSpec {
    /// Digit `negative` is labelled -1, digit `positive` +1.
    Pair { negative: u8, positive: u8 },
    /// Digits 0..=4 are -1, digits 5..=9 are +1.
    LowVsHigh,
}

impl ClassSpec {
    pub fn label(&self, digit: u8) -> Option<f64> {
        match *self {
            ClassSpec::Pair { negative, positive } => {
                if digit == negative {
                    Some(-1.0)
                } else if digit == positive {
                    Some(1.0)
                } else {
                    None
                }
            }
            ClassSpec::LowVsHigh => (digit <= 9).then(|| if digit <= 4 { -1.0 } else { 1.0 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut raw)
        .map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Dataset(format!("truncated IDX header in {what}")))
}

pub(crate) fn parse_idx_images(bytes: &[u8], what: &str) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, what)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Dataset(format!("{what}: bad IDX image magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4, what)? as usize;
    let rows = be_u32(bytes, 8, what)? as usize;
    let cols = be_u32(bytes, 12, what)? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() != need {
        return Err(Error::Dataset(format!(
            "{what}: expected {need} pixel bytes, found {}",
            body.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body.to_vec(),
    })
}

pub(crate) fn parse_idx_labels(bytes: &[u8], what: &str) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, what)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Dataset(format!("{what}: bad IDX label magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4, what)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::Dataset(format!("{what}: expected {count} labels, found {}", body.len())));
    }
    if let Some(bad) = body.iter().find(|&&b| b > 9) {
        return Err(Error::Dataset(format!("{what}: label {bad} is not a digit")));
    }
    Ok(body.to_vec())
}

/// Reads an IDX3 image file, gzipped or raw.
pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    parse_idx_images(&read_maybe_gz(path)?, &path.display().to_string())
}

/// Reads an IDX1 label file, gzipped or raw.
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    parse_idx_labels(&read_maybe_gz(path)?, &path.display().to_string())
}

/// Overlap of source pixel `i` with target cell `t` when `side` source pixels
/// are spread over `res` cells, in units of source pixels.
fn overlap(i: usize, t: usize, side: usize, res: usize) -> f64 {
    let w = side as f64 / res as f64;
    let (a, b) = (t as f64 * w, (t + 1) as f64 * w);
    ((i + 1) as f64).min(b) - (i as f64).max(a)
}

/// Area-weighted average of a square image down to `res × res`, in `[0, 1]`.
pub fn downsample(image: &[u8], side: usize, res: usize) -> Result<Vec<f64>> {
    if image.len() != side * side {
        return Err(Error::DimensionMismatch {
            expected: side * side,
            got: image.len(),
        });
    }
    if res == 0 || res > side {
        return Err(Error::invalid(format!("resolution {res} must lie in 1..={side}")));
    }
    // weights[t] lists (source index, overlap) pairs for target cell t
    let weights: Vec<Vec<(usize, f64)>> = (0..res)
        .map(|t| {
            (0..side)
                .map(|i| (i, overlap(i, t, side, res)))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    let area = (side as f64 / res as f64).powi(2);
    let mut out = Vec::with_capacity(res * res);
    for wr in &weights {
        for wc in &weights {
            let mut acc = 0.0;
            for &(r, a) in wr {
                for &(c, b) in wc {
                    acc += a * b * image[r * side + c] as f64;
                }
            }
            out.push((acc / area / 255.0).clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

/// Loads the digits selected by `classes`, down-samples them and splits them.
/// The returned splits are unfiltered.
#[allow(clippy::too_many_arguments)]
pub fn load_mnist(
    images: &Path,
    labels: &Path,
    resolution: usize,
    classes: ClassSpec,
    n_train: usize,
    n_test: usize,
    seed: u64,
    balanced_train: bool,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if ![3, 8, 15, 28].contains(&resolution) {
        return Err(Error::Dataset(format!(
            "resolution {resolution} is not one of 3, 8, 15, 28"
        )));
    }
    let imgs = read_idx_images(images)?;
    let digits = read_idx_labels(labels)?;
    if imgs.count != digits.len() {
        return Err(Error::Dataset(format!(
            "{} images but {} labels",
            imgs.count,
            digits.len()
        )));
    }
    if imgs.rows != SIDE || imgs.cols != SIDE {
        return Err(Error::Dataset(format!(
            "expected {SIDE}x{SIDE} images, found {}x{}",
            imgs.rows, imgs.cols
        )));
    }
    let chosen: Vec<(usize, f64)> = digits
        .iter()
        .enumerate()
        .filter_map(|(i, &d)| classes.label(d).map(|y| (i, y)))
        .collect();
    let y: Vec<f64> = chosen.iter().map(|&(_, y)| y).collect();
    if !y.iter().any(|&v| v < 0.0) || !y.iter().any(|&v| v > 0.0) {
        return Err(Error::Dataset(format!("class spec {classes:?} selects a single class")));
    }
    let (tr, te) = split_indices(&y, n_train, n_test, seed, balanced_train)?;
    let build = |idx: &[usize]| -> Result<LabeledDataset> {
        let mut values = Vec::with_capacity(idx.len() * resolution * resolution);
        for &k in idx {
            values.extend(downsample(imgs.image(chosen[k].0), SIDE, resolution)?);
        }
        LabeledDataset::new(
            PointSet::new(idx.len(), resolution * resolution, values)?,
            idx.iter().map(|&k| y[k]).collect(),
        )
    };
    Ok((build(&tr)?, build(&te)?))
}
