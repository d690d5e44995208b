//! CSV ingestion for sensor exports: header row, configurable delimiter,
//! one integer label column, everything else numeric channels.
//!
//! Missing values (empty cells or literal NaN) are linearly interpolated per
//! channel; leading/trailing gaps are held at the nearest observed value.

use std::path::Path;

use crate::error::{Error, Result};
use crate::ndcore::Tensor;

use super::{SplitTag, TimeSeriesDataset};

/// Maps CSV columns onto channels and the label.
#[derive(Debug, Clone)]
pub struct SchemaConfig {
    pub delimiter: u8,
    pub label_column: String,
    pub channel_columns: Vec<String>,
    /// Ignored if present; named so it can be skipped explicitly.
    pub timestamp_column: Option<String>,
}

pub fn load_csv(
    path: &Path,
    schema: &SchemaConfig,
    split: SplitTag,
    sample_rate_hz: f64,
) -> Result<TimeSeriesDataset> {
    if !path.exists() {
        return Err(Error::Config(format!("input file not found: {}", path.display())));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header: {e}")))?
        .clone();
    let column_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column {name:?} in {}", path.display())))
    };
    let label_idx = column_index(&schema.label_column)?;
    let channel_idx: Vec<usize> = schema
        .channel_columns
        .iter()
        .map(|c| column_index(c))
        .collect::<Result<_>>()?;

    let d = channel_idx.len();
    let mut raw: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    // Data rows start at file line 2 (line 1 is the header).
    for (row_number, record) in reader.records().enumerate() {
        let line = row_number + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let label_cell = record.get(label_idx).unwrap_or("").trim();
        let label: usize = label_cell.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("label {label_cell:?} is not a non-negative integer"),
        })?;
        labels.push(label);
        for &ci in &channel_idx {
            let cell = record.get(ci).unwrap_or("").trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                raw.push(f64::NAN);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("cell {cell:?} in column {:?} is not numeric", &headers[ci]),
                })?;
                raw.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Data(format!("{} holds no data rows", path.display())));
    }
    let n = labels.len();
    impute_gaps(&mut raw, n, d)?;

    Ok(TimeSeriesDataset {
        samples: Tensor::new(&[n, d], raw)?,
        labels,
        channel_names: schema.channel_columns.clone(),
        sample_rate_hz,
        split,
        norm: None,
    })
}

/// Linear interpolation of NaN runs per channel; edge gaps copy the nearest
/// observed value. A channel with no observed value at all is a data error.
fn impute_gaps(raw: &mut [f64], n: usize, d: usize) -> Result<()> {
    for c in 0..d {
        let mut prev_known: Option<usize> = None;
        let mut i = 0;
        while i < n {
            if raw[i * d + c].is_nan() {
                let gap_start = i;
                let mut j = i;
                while j < n && raw[j * d + c].is_nan() {
                    j += 1;
                }
                match (prev_known, j < n) {
                    (Some(p), true) => {
                        let left = raw[p * d + c];
                        let right = raw[j * d + c];
                        let span = (j - p) as f64;
                        for k in gap_start..j {
                            let frac = (k - p) as f64 / span;
                            raw[k * d + c] = left + (right - left) * frac;
                        }
                    }
                    (None, true) => {
                        let right = raw[j * d + c];
                        for k in gap_start..j {
                            raw[k * d + c] = right;
                        }
                    }
                    (Some(p), false) => {
                        let left = raw[p * d + c];
                        for k in gap_start..j {
                            raw[k * d + c] = left;
                        }
                    }
                    (None, false) => {
                        return Err(Error::Data(format!("channel {c} has no observed values")));
                    }
                }
                i = j;
            } else {
                prev_known = Some(i);
                i += 1;
            }
        }
    }
    Ok(())
}

/// Writes a dataset as CSV with the given channel headers plus a final
/// `label` column. Floats use the shortest round-trip representation, so
/// reloading reproduces the exact values.
pub fn write_csv(path: &Path, ds: &TimeSeriesDataset, label_column: &str) -> Result<()> {
    use std::io::Write;
    let mut out = String::new();
    out.push_str(&ds.channel_names.join(","));
    out.push(',');
    out.push_str(label_column);
    out.push('\n');
    let d = ds.channels();
    for i in 0..ds.len() {
        for c in 0..d {
            out.push_str(&ds.samples.at2(i, c).to_string());
            out.push(',');
        }
        out.push_str(&ds.labels[i].to_string());
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
