//! Sample-wise prediction assembly, macro F1 with Wilson intervals, and
//! per-class attention-weight summaries.

use serde::{Deserialize, Serialize};

use crate::data::{extract_frames, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::model::{argmax, ModelParams, Variant};

/// z for a two-sided 95% interval.
const Z95: f64 = 1.959964;

/// Frame overlap used throughout evaluation (stride = half the window).
const EVAL_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    /// Ground-truth samples of this class.
    pub support: usize,
    /// Samples predicted as this class.
    pub predicted: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Evaluation result over samples (not frames).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub n_samples: usize,
    pub n_classes: usize,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    /// Unweighted mean F1 over `classes_in_mean`.
    pub mean_f1: f64,
    /// Classes present in the ground truth (minus the null class when it is
    /// excluded by configuration).
    pub classes_in_mean: Vec<usize>,
    pub correct: usize,
    pub accuracy: f64,
    /// 95% Wilson interval on the sample-wise correctness proportion.
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Attention weights of one evaluated frame.
#[derive(Debug, Clone)]
pub struct AttentionTrace {
    pub frame_id: usize,
    pub weights: Vec<f64>,
    pub predicted: usize,
    pub true_class: usize,
}

/// Per-class elementwise medians of the attention weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSummary {
    /// Number of weights per frame (window timesteps minus one).
    pub weights_len: usize,
    /// `(class, medians)` for every class with at least one evaluated frame.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl AttentionSummary {
    /// CSV with header `class,w1,...,wK`; floats keep their shortest
    /// round-trip representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for i in 1..=self.weights_len {
            out.push_str(&format!(",w{i}"));
        }
        out.push('\n');
        for (class, medians) in &self.rows {
            out.push_str(&class.to_string());
            for m in medians {
                out.push(',');
                out.push_str(&m.to_string());
            }
            out.push('\n');
        }
        out
    }
}

struct FrameEval {
    probs: Vec<f64>,
    predicted: usize,
    true_class: usize,
    range: (usize, usize),
    weights: Option<Vec<f64>>,
}

/// Eval-mode forward over every frame of the series.
fn eval_frames(params: &ModelParams, ds: &TimeSeriesDataset) -> Result<Vec<FrameEval>> {
    let window = params.config.window;
    let fb = extract_frames(ds, window, EVAL_OVERLAP)?;
    let mut out = Vec::with_capacity(fb.len());
    for i in 0..fb.len() {
        let frame = fb.frame(i);
        let (pred, _) = params.forward(&frame, Mode::Eval, None)?;
        out.push(FrameEval {
            probs: pred.probs.data().to_vec(),
            predicted: pred.class,
            true_class: fb.labels[i],
            range: fb.ranges[i],
            weights: pred.attention_weights,
        });
    }
    Ok(out)
}

/// Per-sample class probabilities assembled from overlapping frames: samples
/// covered by several frames get the elementwise mean of their probability
/// vectors; trailing samples not covered by any frame inherit the last
/// frame's probabilities.
fn assemble_sample_probs(frames: &[FrameEval], n_samples: usize, classes: usize) -> Vec<f64> {
    let mut sums = vec![0.0; n_samples * classes];
    let mut counts = vec![0usize; n_samples];
    for fe in frames {
        for s in fe.range.0..fe.range.1 {
            for (c, &p) in fe.probs.iter().enumerate() {
                sums[s * classes + c] += p;
            }
            counts[s] += 1;
        }
    }
    let last_probs = &frames.last().expect("at least one frame").probs;
    for s in 0..n_samples {
        if counts[s] == 0 {
            sums[s * classes..(s + 1) * classes].copy_from_slice(last_probs);
        } else {
            let k = counts[s] as f64;
            for v in &mut sums[s * classes..(s + 1) * classes] {
                *v /= k;
            }
        }
    }
    sums
}

/// Sample-wise predicted classes for a series.
pub fn samplewise_predict(params: &ModelParams, ds: &TimeSeriesDataset) -> Result<Vec<usize>> {
    let frames = eval_frames(params, ds)?;
    let classes = params.config.classes;
    let probs = assemble_sample_probs(&frames, ds.len(), classes);
    Ok((0..ds.len())
        .map(|s| argmax(&probs[s * classes..(s + 1) * classes]))
        .collect())
}

/// Confusion matrix, per-class precision/recall/F1, macro F1, accuracy, and
/// the Wilson interval, over paired label sequences.
pub fn macro_f1(
    truth: &[usize],
    predicted: &[usize],
    classes: usize,
    include_null_in_mean: bool,
) -> Result<EvalReport> {
    if truth.len() != predicted.len() {
        return Err(Error::Data(format!(
            "label sequences differ in length: {} vs {}",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Data("cannot evaluate zero samples".into()));
    }
    if let Some(&bad) = truth.iter().chain(predicted).find(|&&l| l >= classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }

    let n = truth.len();
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[t][p] += 1;
    }

    let mut per_class = Vec::with_capacity(classes);
    for c in 0..classes {
        let support: usize = confusion[c].iter().sum();
        let predicted_count: usize = (0..classes).map(|t| confusion[t][c]).sum();
        let tp = confusion[c][c];
        let precision = if predicted_count > 0 {
            tp as f64 / predicted_count as f64
        } else {
            0.0
        };
        let recall = if support > 0 { tp as f64 / support as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            class: c,
            support,
            predicted: predicted_count,
            precision,
            recall,
            f1,
        });
    }

    let classes_in_mean: Vec<usize> = per_class
        .iter()
        .filter(|m| m.support > 0 && (include_null_in_mean || m.class != 0))
        .map(|m| m.class)
        .collect();
    let mean_f1 = if classes_in_mean.is_empty() {
        0.0
    } else {
        classes_in_mean.iter().map(|&c| per_class[c].f1).sum::<f64>() / classes_in_mean.len() as f64
    };

    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let (wilson_low, wilson_high) = wilson_interval(correct, n)?;

    Ok(EvalReport {
        format_version: 1,
        n_samples: n,
        n_classes: classes,
        confusion,
        per_class,
        mean_f1,
        classes_in_mean,
        correct,
        accuracy: correct as f64 / n as f64,
        wilson_low,
        wilson_high,
    })
}

/// 95% Wilson score interval for `successes` out of `n` trials.
///
/// The degenerate boundaries are exact: 0 successes pin the lower bound to
/// 0, all successes pin the upper bound to 1.
pub fn wilson_interval(successes: usize, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Data("wilson interval needs n >= 1".into()));
    }
    if successes > n {
        return Err(Error::Data(format!("successes {successes} exceed trials {n}")));
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = p + z2 / (2.0 * nf);
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let mut low = ((center - half) / denom).clamp(0.0, 1.0);
    let mut high = ((center + half) / denom).clamp(0.0, 1.0);
    if successes == 0 {
        low = 0.0;
    }
    if successes == n {
        high = 1.0;
    }
    Ok((low, high))
}

/// Full sample-wise evaluation: report plus the per-frame attention traces
/// (empty for the baseline variant).
pub fn evaluate(
    params: &ModelParams,
    ds: &TimeSeriesDataset,
    include_null_in_mean: bool,
) -> Result<(EvalReport, Vec<AttentionTrace>)> {
    let frames = eval_frames(params, ds)?;
    let classes = params.config.classes;
    let probs = assemble_sample_probs(&frames, ds.len(), classes);
    let predicted: Vec<usize> = (0..ds.len())
        .map(|s| argmax(&probs[s * classes..(s + 1) * classes]))
        .collect();
    let report = macro_f1(&ds.labels, &predicted, classes, include_null_in_mean)?;
    let traces = frames
        .iter()
        .enumerate()
        .filter_map(|(id, fe)| {
            fe.weights.as_ref().map(|w| AttentionTrace {
                frame_id: id,
                weights: w.clone(),
                predicted: fe.predicted,
                true_class: fe.true_class,
            })
        })
        .collect();
    Ok((report, traces))
}

/// Median of a non-empty set of values (mean of the middle pair when even).
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite weights"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-class elementwise medians of attention traces.
pub fn summarize_traces(traces: &[AttentionTrace], classes: usize) -> Result<AttentionSummary> {
    let weights_len = traces
        .first()
        .map(|t| t.weights.len())
        .ok_or_else(|| Error::Data("no attention traces to summarize".into()))?;
    let mut rows = Vec::new();
    for class in 0..classes {
        let of_class: Vec<&AttentionTrace> = traces.iter().filter(|t| t.true_class == class).collect();
        if of_class.is_empty() {
            continue;
        }
        let mut medians = Vec::with_capacity(weights_len);
        for w in 0..weights_len {
            let mut column: Vec<f64> = of_class.iter().map(|t| t.weights[w]).collect();
            medians.push(median(&mut column));
        }
        rows.push((class, medians));
    }
    Ok(AttentionSummary { weights_len, rows })
}

/// Runs the attention variant over a test series and condenses the per-frame
/// weights into per-class medians. Baseline checkpoints are rejected.
pub fn attention_summary(params: &ModelParams, ds: &TimeSeriesDataset) -> Result<AttentionSummary> {
    if params.config.variant != Variant::Attention {
        return Err(Error::UnsupportedVariant(
            "attention summary needs an attention-variant checkpoint".into(),
        ));
    }
    let (_, traces) = evaluate(params, ds, true)?;
    for trace in &traces {
        let sum: f64 = trace.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NonFinite {
                context: format!("attention trace {} does not sum to 1", trace.frame_id),
            });
        }
    }
    summarize_traces(&traces, params.config.classes)
}
