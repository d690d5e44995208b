//! Dataset ingestion, normalization, sliding-window frames, and the
//! synthetic activity generator.

mod csv_io;
mod frames;
mod synth;

pub use csv_io::{load_csv, write_csv, SchemaConfig};
pub use frames::{extract_frames, FrameBatch};
pub use synth::{synth_generate, ClassSpec, SynthSpec};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ndcore::Tensor;

/// Which hold-out split a series belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

/// Per-channel standardization constants, always measured on the train split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// A continuous multichannel series with one integer label per sample
/// (label 0 is the null class by convention).
#[derive(Debug, Clone)]
pub struct TimeSeriesDataset {
    pub samples: Tensor,
    pub labels: Vec<usize>,
    pub channel_names: Vec<String>,
    pub sample_rate_hz: f64,
    pub split: SplitTag,
    /// Present once the series has been standardized.
    pub norm: Option<NormStats>,
}

impl TimeSeriesDataset {
    pub fn len(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.samples.shape()[1]
    }

    /// Population mean and standard deviation per channel. Channels with
    /// (near-)zero spread get std 1 so standardization stays defined.
    pub fn compute_norm(&self) -> NormStats {
        let (n, d) = (self.len(), self.channels());
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for c in 0..d {
                mean[c] += self.samples.at2(i, c);
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut std = vec![0.0; d];
        for i in 0..n {
            for c in 0..d {
                let diff = self.samples.at2(i, c) - mean[c];
                std[c] += diff * diff;
            }
        }
        for s in &mut std {
            *s = (*s / n as f64).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        NormStats { mean, std }
    }

    /// Applies `(x - mean) / std` per channel and records the constants used.
    pub fn standardize(&mut self, stats: &NormStats) -> Result<()> {
        let d = self.channels();
        if stats.mean.len() != d || stats.std.len() != d {
            return Err(Error::ShapeMismatch {
                op: "standardize",
                left: vec![stats.mean.len()],
                right: vec![d],
            });
        }
        for i in 0..self.len() {
            for c in 0..d {
                let idx = i * d + c;
                self.samples.data_mut()[idx] = (self.samples.data()[idx] - stats.mean[c]) / stats.std[c];
            }
        }
        self.norm = Some(stats.clone());
        Ok(())
    }

    /// Validates that all labels fall inside [0, classes).
    pub fn check_labels(&self, classes: usize) -> Result<()> {
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(())
    }
}

/// Plain-text key/value description of a dataset on disk: schema, split
/// files, class count, and the train-split normalization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub channels: Vec<String>,
    pub label_column: String,
    pub delimiter: char,
    pub sample_rate_hz: f64,
    pub classes: usize,
    pub window: usize,
    pub train_file: String,
    pub val_file: String,
    pub test_file: String,
    pub norm: NormStats,
    pub seed: u64,
}

impl DatasetManifest {
    /// Serializes to `key = value` lines. Float formatting round-trips
    /// exactly through `str::parse::<f64>`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format = har-attn-dataset/1");
        let _ = writeln!(s, "channels = {}", self.channels.join(","));
        let _ = writeln!(s, "label_column = {}", self.label_column);
        let _ = writeln!(s, "delimiter = {}", self.delimiter);
        let _ = writeln!(s, "sample_rate_hz = {}", self.sample_rate_hz);
        let _ = writeln!(s, "classes = {}", self.classes);
        let _ = writeln!(s, "window = {}", self.window);
        let _ = writeln!(s, "train_file = {}", self.train_file);
        let _ = writeln!(s, "val_file = {}", self.val_file);
        let _ = writeln!(s, "test_file = {}", self.test_file);
        let _ = writeln!(
            s,
            "norm_mean = {}",
            self.norm.mean.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        );
        let _ = writeln!(
            s,
            "norm_std = {}",
            self.norm.std.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        );
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<&str, &str> = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("manifest line without '=': {line:?}")))?;
            map.insert(key.trim(), value.trim());
        }
        let get = |key: &str| -> Result<&str> {
            map.get(key)
                .copied()
                .ok_or_else(|| Error::Schema(format!("manifest missing key {key:?}")))
        };
        if get("format")? != "har-attn-dataset/1" {
            return Err(Error::Schema(format!(
                "unsupported dataset manifest format {:?}",
                get("format")?
            )));
        }
        let floats = |raw: &str, key: &str| -> Result<Vec<f64>> {
            raw.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Schema(format!("bad float in {key}: {t:?}")))
                })
                .collect()
        };
        let delimiter_raw = get("delimiter")?;
        let delimiter = delimiter_raw
            .chars()
            .next()
            .filter(|_| delimiter_raw.chars().count() == 1)
            .ok_or_else(|| Error::Schema(format!("delimiter must be one character, got {delimiter_raw:?}")))?;
        Ok(DatasetManifest {
            channels: get("channels")?.split(',').map(|s| s.trim().to_string()).collect(),
            label_column: get("label_column")?.to_string(),
            delimiter,
            sample_rate_hz: get("sample_rate_hz")?
                .parse()
                .map_err(|_| Error::Schema("bad sample_rate_hz".into()))?,
            classes: get("classes")?
                .parse()
                .map_err(|_| Error::Schema("bad classes".into()))?,
            window: get("window")?
                .parse()
                .map_err(|_| Error::Schema("bad window".into()))?,
            train_file: get("train_file")?.to_string(),
            val_file: get("val_file")?.to_string(),
            test_file: get("test_file")?.to_string(),
            norm: NormStats {
                mean: floats(get("norm_mean")?, "norm_mean")?,
                std: floats(get("norm_std")?, "norm_std")?,
            },
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::Schema("bad seed".into()))?,
        })
    }

    pub fn schema(&self) -> SchemaConfig {
        SchemaConfig {
            delimiter: self.delimiter as u8,
            label_column: self.label_column.clone(),
            channel_columns: self.channels.clone(),
            timestamp_column: None,
        }
    }
}

/// The three standardized splits plus their manifest.
#[derive(Debug)]
pub struct DatasetBundle {
    pub manifest: DatasetManifest,
    pub train: TimeSeriesDataset,
    pub val: TimeSeriesDataset,
    pub test: TimeSeriesDataset,
}

/// Loads the splits named by a manifest, imputes gaps, standardizes every
/// split with the manifest's train-split constants, and validates labels.
pub fn load_bundle(manifest_path: &Path) -> Result<DatasetBundle> {
    if !manifest_path.exists() {
        return Err(Error::Config(format!(
            "dataset manifest not found: {}",
            manifest_path.display()
        )));
    }
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest = DatasetManifest::parse(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let schema = manifest.schema();

    let load_split = |file: &str, split: SplitTag| -> Result<TimeSeriesDataset> {
        let path: PathBuf = base.join(file);
        if !path.exists() {
            return Err(Error::Config(format!("split file not found: {}", path.display())));
        }
        let mut ds = load_csv(&path, &schema, split, manifest.sample_rate_hz)?;
        ds.standardize(&manifest.norm)?;
        ds.check_labels(manifest.classes)?;
        Ok(ds)
    };

    Ok(DatasetBundle {
        train: load_split(&manifest.train_file, SplitTag::Train)?,
        val: load_split(&manifest.val_file, SplitTag::Val)?,
        test: load_split(&manifest.test_file, SplitTag::Test)?,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let manifest = DatasetManifest {
            channels: vec!["ch0".into(), "ch1".into()],
            label_column: "label".into(),
            delimiter: ',',
            sample_rate_hz: 24.0,
            classes: 4,
            window: 24,
            train_file: "train.csv".into(),
            val_file: "val.csv".into(),
            test_file: "test.csv".into(),
            norm: NormStats {
                mean: vec![0.25, -1.5e-7],
                std: vec![1.0, 3.25],
            },
            seed: 99,
        };
        let parsed = DatasetManifest::parse(&manifest.to_text()).unwrap();
        assert_eq!(parsed, manifest);
    }

    #[test]
    fn missing_key_is_a_schema_error() {
        assert!(matches!(
            DatasetManifest::parse("format = har-attn-dataset/1\n"),
            Err(Error::Schema(_))
        ));
    }
}
