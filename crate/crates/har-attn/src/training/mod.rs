//! Mini-batch training with RMSProp, per-epoch learning-rate decay, shuffled
//! batches, best-validation checkpointing, and early stopping.

mod gradcheck;
mod rmsprop;

pub use gradcheck::{gradcheck, GradCheckEntry, GradCheckReport, LINEAR_TOLERANCE};
pub use rmsprop::RmsProp;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{extract_frames, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::evaluation;
use crate::layers::Mode;
use crate::model::{cross_entropy_loss, ArchConfig, Checkpoint, ModelGrads, ModelParams, Variant};
use crate::ndcore::{shuffle_indices, Rng};

/// Training hyperparameters. Defaults mirror the reference protocol:
/// learning rate 0.001 decayed after every epoch, batch size 100.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub seed: u64,
    pub dropout_p: f64,
    pub variant: Variant,
    /// Early-stop patience on validation mean F1, in epochs.
    pub patience: usize,
    pub rms_alpha: f64,
    pub rms_epsilon: f64,
    pub include_null_in_mean: bool,
}

impl TrainConfig {
    pub fn new(variant: Variant, seed: u64) -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 100,
            lr: 0.001,
            lr_decay: 0.98,
            seed,
            dropout_p: 0.5,
            variant,
            patience: 5,
            rms_alpha: 0.9,
            rms_epsilon: 1e-8,
            include_null_in_mean: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.lr_decay <= 0.0 || self.lr_decay > 1.0 {
            return Err(Error::Config(format!(
                "lr_decay must be in (0,1], got {}",
                self.lr_decay
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p must be in [0,1), got {}",
                self.dropout_p
            )));
        }
        Ok(())
    }
}

/// One line of the JSON-lines training log. Deliberately free of wall-clock
/// values so repeated seeded runs produce byte-identical logs; timing lives
/// in the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_mean_f1: f64,
}

/// Everything a training run produces.
#[derive(Debug)]
pub struct TrainOutcome {
    /// Best-validation parameters (initial parameters when `epochs` is 0).
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochRecord>,
    /// Wall-clock seconds per epoch, aligned with `log`.
    pub epoch_seconds: Vec<f64>,
    pub best_val_f1: f64,
}

impl TrainOutcome {
    /// The log serialized as JSON lines.
    pub fn log_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.log {
            out.push_str(&serde_json::to_string(record).expect("epoch record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Trains a model of `arch` (variant and dropout taken from `config`) on the
/// train split, checkpointing the epoch with the best validation mean F1.
pub fn train(
    arch: &ArchConfig,
    config: &TrainConfig,
    train_ds: &TimeSeriesDataset,
    val_ds: &TimeSeriesDataset,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_ds.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    let mut arch = arch.clone();
    arch.variant = config.variant;
    arch.dropout_p = config.dropout_p;
    arch.validate()?;
    train_ds.check_labels(arch.classes)?;
    val_ds.check_labels(arch.classes)?;

    let frames = extract_frames(train_ds, arch.window, 0.5)?;
    let n_frames = frames.len();

    let mut rng = Rng::new(config.seed);
    let mut params = ModelParams::init(&arch, &mut rng)?;
    let mut optimizer = RmsProp::with_config(&params, config.rms_alpha, config.rms_epsilon)?;

    let mut best_params = params.clone();
    let mut best_val_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut epochs_since_best = 0usize;
    let mut log = Vec::new();
    let mut epoch_seconds = Vec::new();
    let mut lr = config.lr;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let order = shuffle_indices(&mut rng, n_frames);
        let mut epoch_loss_sum = 0.0;

        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let mut batch_grads = ModelGrads::zeros_like(&params)?;
            for &frame_idx in batch {
                let frame = frames.frame(frame_idx);
                let label = frames.labels[frame_idx];
                let (pred, cache) = params.forward(&frame, Mode::Train, Some(&mut rng))?;
                let (loss, seed) = cross_entropy_loss(&pred, label)?;
                if !loss.is_finite() {
                    return Err(Error::TrainingDiverged {
                        epoch,
                        batch: batch_idx,
                        what: "loss",
                        group: format!("frame {frame_idx}"),
                    });
                }
                epoch_loss_sum += loss;
                let grads = params.backward(&cache, &seed)?;
                batch_grads.accumulate(&grads)?;
            }
            batch_grads.scale(1.0 / batch.len() as f64);
            optimizer.step(&mut params, &batch_grads, lr).map_err(|e| match e {
                Error::NonFinite { context } => Error::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                    what: "gradient",
                    group: context,
                },
                other => other,
            })?;
        }

        let train_loss = epoch_loss_sum / n_frames as f64;
        let val_mean_f1 = validation_mean_f1(&params, val_ds, config.include_null_in_mean)?;
        log.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_mean_f1,
        });
        epoch_seconds.push(started.elapsed().as_secs_f64());

        if val_mean_f1 > best_val_f1 {
            best_val_f1 = val_mean_f1;
            best_params = params.clone();
            best_epoch = epoch;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
        }

        lr *= config.lr_decay;

        if epochs_since_best >= config.patience {
            break;
        }
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            params: best_params,
            seed: config.seed,
            epoch: best_epoch,
        },
        log,
        epoch_seconds,
        best_val_f1: if best_val_f1.is_finite() { best_val_f1 } else { 0.0 },
    })
}

fn validation_mean_f1(
    params: &ModelParams,
    val_ds: &TimeSeriesDataset,
    include_null: bool,
) -> Result<f64> {
    let predicted = evaluation::samplewise_predict(params, val_ds)?;
    let report = evaluation::macro_f1(&val_ds.labels, &predicted, params.config.classes, include_null)?;
    Ok(report.mean_f1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, ClassSpec, SplitTag, SynthSpec};

    fn two_class_spec() -> SynthSpec {
        // Strongly separated signatures: linearly separable by construction.
        SynthSpec {
            channels: 2,
            sample_rate_hz: 24.0,
            noise_std: 0.05,
            classes: vec![
                ClassSpec {
                    duration_min: 48,
                    duration_max: 96,
                    base_offset: 1.0,
                    ..ClassSpec::default()
                },
                ClassSpec {
                    duration_min: 48,
                    duration_max: 96,
                    freq_hz: 5.0,
                    base_offset: -1.0,
                    ..ClassSpec::default()
                },
            ],
        }
    }

    fn small_arch() -> ArchConfig {
        let mut arch = ArchConfig::new(2, 2, Variant::Baseline);
        arch.filters = 4;
        arch.hidden = 8;
        arch
    }

    fn small_config(seed: u64) -> TrainConfig {
        let mut config = TrainConfig::new(Variant::Baseline, seed);
        config.epochs = 5;
        config.batch_size = 16;
        config.dropout_p = 0.1;
        config
    }

    #[test]
    fn learning_rate_decays_geometrically() {
        let spec = two_class_spec();
        let mut rng = Rng::new(1);
        let train_ds = synth_generate(&mut rng, &spec, 600, SplitTag::Train).unwrap();
        let val_ds = synth_generate(&mut rng, &spec, 200, SplitTag::Val).unwrap();
        let mut config = small_config(2);
        config.epochs = 3;
        config.lr = 0.001;
        config.lr_decay = 0.9;
        config.patience = 10;
        let outcome = train(&small_arch(), &config, &train_ds, &val_ds).unwrap();
        let lrs: Vec<f64> = outcome.log.iter().map(|r| r.lr).collect();
        assert!((lrs[0] - 0.001).abs() < 1e-15);
        assert!((lrs[1] - 0.0009).abs() < 1e-12);
        assert!((lrs[2] - 0.00081).abs() < 1e-12);
    }

    #[test]
    fn same_seed_gives_identical_logs_and_checkpoints() {
        let spec = two_class_spec();
        let mut rng = Rng::new(3);
        let train_ds = synth_generate(&mut rng, &spec, 600, SplitTag::Train).unwrap();
        let val_ds = synth_generate(&mut rng, &spec, 200, SplitTag::Val).unwrap();
        let config = small_config(7);
        let a = train(&small_arch(), &config, &train_ds, &val_ds).unwrap();
        let b = train(&small_arch(), &config, &train_ds, &val_ds).unwrap();
        assert_eq!(a.log_jsonl(), b.log_jsonl());
        for ((_, ta), (_, tb)) in a
            .checkpoint
            .params
            .named_tensors()
            .iter()
            .zip(b.checkpoint.params.named_tensors())
        {
            let bits_a: Vec<u64> = ta.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = tb.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn separable_two_class_problem_trains_below_loss_threshold() {
        let spec = two_class_spec();
        let mut rng = Rng::new(5);
        let train_ds = synth_generate(&mut rng, &spec, 4800, SplitTag::Train).unwrap();
        let val_ds = synth_generate(&mut rng, &spec, 600, SplitTag::Val).unwrap();
        let mut config = small_config(11);
        config.epochs = 5;
        config.batch_size = 8;
        config.dropout_p = 0.0;
        let outcome = train(&small_arch(), &config, &train_ds, &val_ds).unwrap();
        let final_loss = outcome.log.last().unwrap().train_loss;
        assert!(
            final_loss < 0.1,
            "separable problem should train below 0.1 within 5 epochs, got {final_loss}"
        );
    }

    #[test]
    fn empty_dataset_is_a_data_error() {
        let spec = two_class_spec();
        let mut rng = Rng::new(6);
        let val_ds = synth_generate(&mut rng, &spec, 100, SplitTag::Val).unwrap();
        let mut empty = val_ds.clone();
        empty.samples = crate::ndcore::Tensor::zeros(&[1, 2]).unwrap();
        empty.labels = vec![0];
        // One sample is shorter than the window.
        assert!(matches!(
            train(&small_arch(), &small_config(1), &empty, &val_ds),
            Err(Error::WindowTooShort { .. })
        ));
    }

    #[test]
    fn zero_epochs_returns_initial_parameters_and_no_records() {
        let spec = two_class_spec();
        let mut rng = Rng::new(8);
        let train_ds = synth_generate(&mut rng, &spec, 300, SplitTag::Train).unwrap();
        let val_ds = synth_generate(&mut rng, &spec, 100, SplitTag::Val).unwrap();
        let mut config = small_config(9);
        config.epochs = 0;
        let outcome = train(&small_arch(), &config, &train_ds, &val_ds).unwrap();
        assert!(outcome.log.is_empty());
        assert_eq!(outcome.checkpoint.epoch, 0);
        // Matches a fresh init drawn from the same seed.
        let mut arch = small_arch();
        arch.variant = config.variant;
        arch.dropout_p = config.dropout_p;
        let fresh = ModelParams::init(&arch, &mut Rng::new(config.seed)).unwrap();
        for ((_, a), (_, b)) in outcome
            .checkpoint
            .params
            .named_tensors()
            .iter()
            .zip(fresh.named_tensors())
        {
            assert_eq!(a.data(), b.data());
        }
    }
}
