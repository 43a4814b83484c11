//! Tabular UCI datasets with built-in column schemas.
//!
//! Fields may be separated by commas or whitespace, and a single header line
//! is skipped when its first field is not numeric. The class is the last
//! column, coded 0 and 1.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{min_max, normalize_with, split_indices};
use crate::error::{Error, Result};
use crate::gp::LabeledDataset;
use crate::kernel::PointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UciName {
    AustralianCredit,
    Spambase,
    Banknote,
}

#[derive(Debug, Clone, Copy)]
enum Column {
    Numeric,
    /// One-of-n expansion over the listed codes.
    Categorical(&'static [i64]),
}

const A5: &[i64] = &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14];
const A6: &[i64] = &[1, 2, 3, 4, 5, 6, 7, 8, 9];
const THREE: &[i64] = &[1, 2, 3];

const AUSTRALIAN: [Column; 14] = [
    Column::Numeric,
    Column::Numeric,
    Column::Numeric,
    Column::Categorical(THREE),
    Column::Categorical(A5),
    Column::Categorical(A6),
    Column::Numeric,
    Column::Numeric,
    Column::Numeric,
    Column::Numeric,
    Column::Numeric,
    Column::Categorical(THREE),
    Column::Numeric,
    Column::Numeric,
];

impl UciName {
    fn schema(self) -> Vec<Column> {
        match self {
            UciName::AustralianCredit => AUSTRALIAN.to_vec(),
            UciName::Spambase => vec![Column::Numeric; 57],
            UciName::Banknote => vec![Column::Numeric; 4],
        }
    }

    fn feature_names(self) -> Vec<String> {
        let mut names = Vec::new();
        for (j, col) in self.schema().iter().enumerate() {
            match col {
                Column::Numeric => names.push(format!("A{}", j + 1)),
                Column::Categorical(codes) => {
                    names.extend(codes.iter().map(|c| format!("A{}={c}", j + 1)))
                }
            }
        }
        names
    }
}

/// Parses the raw table, expanding categorical columns. Values are not
/// normalized.
pub fn parse_uci(name: UciName, text: &str) -> Result<LabeledDataset> {
    let schema = name.schema();
    let width = schema.len() + 1;
    let mut values = Vec::new();
    let mut y = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    if let Some((_, first)) = lines.peek() {
        let f = first.split(|c: char| c == ',' || c.is_whitespace()).find(|s| !s.is_empty());
        if f.is_some_and(|f| f.trim().parse::<f64>().is_err()) {
            lines.next();
        }
    }
    for (ln, line) in lines {
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != width {
            return Err(Error::Dataset(format!(
                "{name:?} line {}: expected {width} columns, found {}",
                ln + 1,
                fields.len()
            )));
        }
        let num = |j: usize| -> Result<f64> {
            fields[j]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::Dataset(format!(
                        "{name:?} line {} column {j}: '{}' is not a finite number",
                        ln + 1,
                        fields[j]
                    ))
                })
        };
        for (j, col) in schema.iter().enumerate() {
            let v = num(j)?;
            match col {
                Column::Numeric => values.push(v),
                Column::Categorical(codes) => {
                    let hit = codes.iter().position(|&c| c as f64 == v).ok_or_else(|| {
                        Error::Dataset(format!(
                            "{name:?} line {} column {j}: code {v} not in {codes:?}",
                            ln + 1
                        ))
                    })?;
                    values.extend((0..codes.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
                }
            }
        }
        y.push(match num(width - 1)? {
            v if v == 1.0 => 1.0,
            v if v == 0.0 => -1.0,
            v => {
                return Err(Error::Dataset(format!(
                    "{name:?} line {} column {}: class {v} is not 0 or 1",
                    ln + 1,
                    width - 1
                )))
            }
        });
    }
    let d = name.feature_names().len();
    let mut data = LabeledDataset::new(PointSet::new(y.len(), d, values)?, y)?;
    data.feature_names = Some(name.feature_names());
    Ok(data)
}

/// Loads, splits and min-max normalizes a UCI table. Ranges come from the
/// training split; test values outside them are clipped.
pub fn load_uci(
    name: UciName,
    path: &Path,
    n_train: usize,
    n_test: usize,
    seed: u64,
    balanced_train: bool,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let all = parse_uci(name, &text)?;
    let (tr, te) = split_indices(&all.y, n_train, n_test, seed, balanced_train)?;
    let (mut train, mut test) = (all.select_rows(&tr), all.select_rows(&te));
    let ranges = min_max(&train.x);
    train.x = normalize_with(&train.x, &ranges);
    test.x = normalize_with(&test.x, &ranges);
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banknote_and_spambase_widths() {
        let bank = "3.6,8.6,-2.8,-0.4,0\n-1.2,2.1,0.5,1.0,1\n";
        let d = parse_uci(UciName::Banknote, bank).unwrap();
        assert_eq!((d.len(), d.dims()), (2, 4));
        assert_eq!(d.y, vec![-1.0, 1.0]);
        let row: Vec<String> = (0..57).map(|i| format!("{}", i as f64 * 0.1)).collect();
        let spam = format!("{},1\n{},0\n", row.join(","), row.join(","));
        assert_eq!(parse_uci(UciName::Spambase, &spam).unwrap().dims(), 57);
    }

    #[test]
    fn credit_one_hot_and_header() {
        let text = "h1 h2\n1 22.08 11.46 2 4 4 1.585 0 0 0 1 2 100 1213 0\n";
        let d = parse_uci(UciName::AustralianCredit, text).unwrap();
        assert_eq!(d.dims(), 10 + 3 + 14 + 9 + 3);
        let names = d.feature_names.as_ref().unwrap();
        assert_eq!(names.len(), d.dims());
        let r = d.x.row(0);
        let at = |n: &str| r[names.iter().position(|x| x == n).unwrap()];
        assert_eq!(at("A4=2"), 1.0);
        assert_eq!(at("A4=1"), 0.0);
        assert_eq!(at("A5=4"), 1.0);
        assert_eq!(at("A12=2"), 1.0);
        assert_eq!(at("A14"), 1213.0);
    }

    #[test]
    fn schema_errors_name_the_column() {
        let msg = |t: &str| parse_uci(UciName::Banknote, t).unwrap_err().to_string();
        assert!(msg("1,2,3,0\n").contains("expected 5 columns"));
        assert!(msg("1,2,x,4,0\n").contains("column 2"));
        assert!(msg("1,2,3,4,2\n").contains("column 4"));
        let bad_code = "1 22.08 11.46 7 4 4 1.585 0 0 0 1 2 100 1213 0\n";
        let e = parse_uci(UciName::AustralianCredit, bad_code).unwrap_err().to_string();
        assert!(e.contains("column 3"), "{e}");
    }

    #[test]
    fn load_normalizes_from_train() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bank.csv");
        let text: String = (0..20)
            .map(|i| format!("{},{},{},{},{}\n", i, 2 * i, -i, i * i, i % 2))
            .collect();
        std::fs::write(&p, text).unwrap();
        let (tr, te) = load_uci(UciName::Banknote, &p, 12, 8, 1, false).unwrap();
        for part in [&tr, &te] {
            assert!(part.x.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        for j in 0..4 {
            let c = tr.x.column(j);
            assert_eq!(c.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(c.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
    }
}
