//! Flat text serialization of [`LatentModel`].
//!
//! ```text
//! advbound-latent-model v1
//! kernel eq <variance> <lengthscale>
//! noise_variance <sigma2>
//! centers <M> <D>
//! <D values>            (M lines, row-major)
//! alpha
//! <value>               (M lines)
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a model read
//! back is bit-identical to the one written.

use std::fmt::Write as _;
use std::path::Path;

use super::LatentModel;
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, PointSet};

pub const MODEL_FORMAT_HEADER: &str = "advbound-latent-model v1";

pub fn model_to_string(model: &LatentModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_FORMAT_HEADER}");
    let _ = writeln!(
        out,
        "kernel eq {} {}",
        model.kernel.variance, model.kernel.lengthscale
    );
    let _ = writeln!(out, "noise_variance {}", model.noise_variance);
    let _ = writeln!(out, "centers {} {}", model.centers.rows(), model.centers.dims());
    for row in model.centers.iter_rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    let _ = writeln!(out, "alpha");
    for a in &model.alpha {
        let _ = writeln!(out, "{a}");
    }
    out
}

pub fn model_from_str(text: &str, origin: &Path) -> Result<LatentModel> {
    let bad = |msg: String| Error::format(origin, msg);
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut next = |what: &str| {
        lines
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| bad(format!("unexpected end of file, expected {what}")))
    };
    let parse_f64 = |s: &str, line: usize| {
        s.parse::<f64>()
            .map_err(|_| bad(format!("line {line}: bad number {s:?}")))
    };
    let parse_usize = |s: &str, line: usize| {
        s.parse::<usize>()
            .map_err(|_| bad(format!("line {line}: bad count {s:?}")))
    };

    let (ln, header) = next("header")?;
    if header != MODEL_FORMAT_HEADER {
        return Err(bad(format!("line {ln}: unsupported header {header:?}")));
    }
    let (ln, kernel_line) = next("kernel line")?;
    let parts: Vec<&str> = kernel_line.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "kernel" || parts[1] != "eq" {
        return Err(bad(format!("line {ln}: expected `kernel eq <variance> <lengthscale>`")));
    }
    let kernel = KernelSpec::new(parse_f64(parts[2], ln)?, parse_f64(parts[3], ln)?)?;
    let (ln, noise_line) = next("noise_variance line")?;
    let noise = match noise_line.split_whitespace().collect::<Vec<_>>()[..] {
        ["noise_variance", v] => parse_f64(v, ln)?,
        _ => return Err(bad(format!("line {ln}: expected `noise_variance <value>`"))),
    };
    let (ln, centers_line) = next("centers line")?;
    let (m, d) = match centers_line.split_whitespace().collect::<Vec<_>>()[..] {
        ["centers", m, d] => (parse_usize(m, ln)?, parse_usize(d, ln)?),
        _ => return Err(bad(format!("line {ln}: expected `centers <M> <D>`"))),
    };
    let mut values = Vec::with_capacity(m * d);
    for _ in 0..m {
        let (ln, row) = next("center row")?;
        let before = values.len();
        for tok in row.split_whitespace() {
            values.push(parse_f64(tok, ln)?);
        }
        if values.len() - before != d {
            return Err(bad(format!("line {ln}: expected {d} values per center")));
        }
    }
    let (ln, alpha_line) = next("alpha line")?;
    if alpha_line != "alpha" {
        return Err(bad(format!("line {ln}: expected `alpha`")));
    }
    let mut alpha = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, v) = next("alpha value")?;
        alpha.push(parse_f64(v, ln)?);
    }
    if let Some((i, _)) = lines.next() {
        return Err(bad(format!("line {}: trailing content", i + 1)));
    }
    LatentModel::new(PointSet::new(m, d, values)?, alpha, kernel, noise)
}

pub fn write_model(model: &LatentModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<LatentModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(
            m in 1usize..6,
            d in 1usize..5,
            seed in any::<u64>(),
            v in 1e-3f64..1e3,
            l in 1e-3f64..1e2,
            s2 in 0.0f64..10.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let centers = PointSet::new(m, d, (0..m * d).map(|_| rng.random::<f64>()).collect()).unwrap();
            let alpha: Vec<f64> = (0..m).map(|_| rng.random_range(-1e6..1e6)).collect();
            let model = LatentModel::new(centers, alpha, KernelSpec::new(v, l).unwrap(), s2).unwrap();
            let back = model_from_str(&model_to_string(&model), Path::new("mem")).unwrap();
            prop_assert_eq!(back, model);
        }
    }

    #[test]
    fn rejects_malformed_files() {
        let p = Path::new("mem");
        assert!(model_from_str("wrong header\n", p).is_err());
        let ok = "advbound-latent-model v1\nkernel eq 1 2\nnoise_variance 0.01\ncenters 1 2\n0.5 0.5\nalpha\n3\n";
        assert!(model_from_str(ok, p).is_ok());
        assert!(model_from_str(&ok.replace("0.5 0.5", "0.5"), p).is_err());
        assert!(model_from_str(&ok.replace("kernel eq 1 2", "kernel eq 1"), p).is_err());
        assert!(model_from_str(&format!("{ok}7\n"), p).is_err());
        assert!(model_from_str(&ok.replace("alpha\n3", "alpha\nx"), p).is_err());
    }
}
