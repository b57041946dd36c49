use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Matrix;

use super::{Dataset, FeatureKind};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a dataset from a CSV file. See [`read_csv`].
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, feature_kind: FeatureKind) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut ds = read_csv(file, label_column, feature_kind)?;
    if let Some(stem) = path.file_stem() {
        ds.name = stem.to_string_lossy().into_owned();
    }
    Ok(ds)
}

/// Parses a numeric CSV with a header row. Every column except
/// `label_column` is a feature. Label values are re-indexed to `0..C` in
/// increasing numeric order; row order is preserved. Line numbers in errors
/// are 1-based and count the header.
pub fn read_csv<R: Read>(reader: R, label_column: &str, feature_kind: FeatureKind) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(parse_err(1, "empty file")),
        Some(r) => r.map_err(|e| parse_err(1, e.to_string()))?,
    };
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let label_idx = names
        .iter()
        .position(|n| n == label_column)
        .ok_or_else(|| parse_err(1, format!("missing label column `{label_column}`")))?;

    let width = names.len();
    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    for (k, rec) in records.enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, found {}", rec.len())));
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric cell `{cell}` in column `{}`", names[j])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value in column `{}`", names[j])));
            }
            if j == label_idx {
                if v.fract() != 0.0 {
                    return Err(parse_err(line, format!("label `{cell}` is not an integer")));
                }
                raw_labels.push(v as i64);
            } else {
                features.push(v);
            }
        }
    }
    if raw_labels.is_empty() {
        return Err(parse_err(2, "no data rows"));
    }

    let dense: BTreeMap<i64, usize> = raw_labels
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    let labels: Vec<usize> = raw_labels.iter().map(|v| dense[v]).collect();
    let n = labels.len();
    let mut ds = Dataset::new(
        "csv",
        Matrix::from_vec(n, width - 1, features)?,
        labels,
        dense.len(),
        feature_kind,
    )?;
    ds.feature_names = names
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, n)| n.clone())
        .collect();
    ds.label_name = names[label_idx].clone();
    Ok(ds)
}

/// Writes the dataset as CSV: feature columns, then the label column.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut header = dataset.feature_names.clone();
    header.push(dataset.label_name.clone());
    w.write_record(&header).map_err(io)?;
    for (row, &y) in dataset.features.row_iter().zip(&dataset.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv(dataset, std::fs::File::create(path)?)
}
