//! Seeded synthetic benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gp::LabeledDataset;
use crate::kernel::PointSet;

fn sample(rng: &mut ChaCha8Rng, centre: f64, sigma: f64, dims: usize, out: &mut Vec<f64>) {
    let normal = Normal::new(centre, sigma).expect("sigma is positive");
    out.extend((0..dims).map(|_| normal.sample(rng).clamp(0.0, 1.0)));
}

/// Two isotropic Gaussians (σ = 1/4) centred at (1/4, 1/4, 1/4), labelled -1,
/// and (3/4, 3/4, 3/4), labelled +1. The first `n/2` rows are class -1.
pub fn gen_two_gaussians_3d(seed: u64, n: usize) -> Result<LabeledDataset> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::invalid(format!("n must be even and positive, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(3 * n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (centre, label) = if i < n / 2 { (0.25, -1.0) } else { (0.75, 1.0) };
        sample(&mut rng, centre, 0.25, 3, &mut values);
        y.push(label);
    }
    LabeledDataset::new(PointSet::new(n, 3, values)?, y)
}

/// Three Gaussian clusters (σ = 0.1) on the diagonal of the unit 8-cube at
/// 1/4, 1/2 and 3/4. The outer clusters are +1 and the middle one -1. Odd
/// rows are in the middle cluster and even rows alternate between the outer
/// two, so the classes are balanced.
pub fn gen_three_clusters_8d(seed: u64, n: usize) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(8 * n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let k = cluster_of(i);
        sample(&mut rng, 0.25 * (k + 1) as f64, 0.1, 8, &mut values);
        y.push(if k == 1 { -1.0 } else { 1.0 });
    }
    LabeledDataset::new(PointSet::new(n, 8, values)?, y)
}

fn cluster_of(i: usize) -> usize {
    [0, 1, 2, 1][i % 4]
}
