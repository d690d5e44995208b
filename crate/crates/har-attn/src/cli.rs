//! Subcommands behind the `har-attn` binary. All logic lives here so the
//! binary itself stays a thin dispatcher.
//!
//! Exit codes: 0 success, 2 usage/configuration/data problems, 3 numeric
//! failures, 4 I/O failures. Every run writes a JSON manifest capturing the
//! command, the effective configuration, the seed, and digests of inputs and
//! outputs; wall-clock timing lives only in the manifest so the other
//! artifacts stay byte-reproducible.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    load_bundle, synth_generate, write_csv, DatasetManifest, SplitTag, SynthSpec,
};
use crate::error::{Error, Result};
use crate::evaluation;
use crate::model::{load_checkpoint, save_checkpoint, ArchConfig, Variant};
use crate::ndcore::Rng;
use crate::training::{self, TrainConfig};

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "HAR_ATTN_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "har-attn",
    version,
    about = "Train and evaluate temporal-attention ConvLSTM activity-recognition models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate synthetic dataset splits from a TOML spec.
    Synth {
        /// Generator spec (TOML).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory (default: $HAR_ATTN_OUT_DIR or ./har-attn-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model on a dataset described by a manifest.
    Train {
        /// Dataset manifest path.
        #[arg(long)]
        data: PathBuf,
        /// "baseline" or "attention".
        #[arg(long)]
        variant: String,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        lr_decay: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        patience: Option<usize>,
        /// Optional TOML config; flags override it, it overrides defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the test split of a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Where to write the evaluation report (JSON).
        #[arg(long)]
        report: PathBuf,
    },
    /// Export per-class median attention weights as CSV.
    AttentionDump {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Verify analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

/// Parses argv and runs; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth { spec, seed, out } => cmd_synth(&spec, seed, out),
        Command::Train {
            data,
            variant,
            epochs,
            lr,
            lr_decay,
            batch,
            seed,
            dropout,
            patience,
            config,
            out,
        } => cmd_train(TrainArgs {
            data,
            variant,
            epochs,
            lr,
            lr_decay,
            batch,
            seed,
            dropout,
            patience,
            config,
            out,
        }),
        Command::Eval {
            checkpoint,
            data,
            report,
        } => cmd_eval(&checkpoint, &data, &report),
        Command::AttentionDump {
            checkpoint,
            data,
            csv,
        } => cmd_attention_dump(&checkpoint, &data, &csv),
        Command::Gradcheck { tolerance } => cmd_gradcheck(tolerance),
    }
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    seed: u64,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    wall_clock_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    epoch_seconds: Option<Vec<f64>>,
}

fn sha256_of(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(hasher.finalize()),
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Data(format!("manifest serialization: {e}")))?;
    write_atomic(path, format!("{json}\n").as_bytes())
}

fn default_out_dir(out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("har-attn-out"))
    })
}

/// Synth spec file: generator parameters plus split sizes and the window
/// recorded into the dataset manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SynthFileSpec {
    #[serde(flatten)]
    spec: SynthSpec,
    #[serde(default = "default_train_samples")]
    train_samples: usize,
    #[serde(default = "default_val_samples")]
    val_samples: usize,
    #[serde(default = "default_test_samples")]
    test_samples: usize,
    #[serde(default = "default_window")]
    window: usize,
}

fn default_train_samples() -> usize {
    20_000
}
fn default_val_samples() -> usize {
    4_000
}
fn default_test_samples() -> usize {
    5_000
}
fn default_window() -> usize {
    24
}

fn cmd_synth(spec_path: &Path, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let started = Instant::now();
    if !spec_path.exists() {
        return Err(Error::Config(format!(
            "synth spec file not found: {}",
            spec_path.display()
        )));
    }
    let text = fs::read_to_string(spec_path)?;
    let file_spec: SynthFileSpec =
        toml::from_str(&text).map_err(|e| Error::Config(format!("bad synth spec: {e}")))?;
    file_spec.spec.validate()?;

    let out_dir = default_out_dir(out);
    fs::create_dir_all(&out_dir)?;

    let mut rng = Rng::new(seed);
    let train = synth_generate(&mut rng, &file_spec.spec, file_spec.train_samples, SplitTag::Train)?;
    let val = synth_generate(&mut rng, &file_spec.spec, file_spec.val_samples, SplitTag::Val)?;
    let test = synth_generate(&mut rng, &file_spec.spec, file_spec.test_samples, SplitTag::Test)?;
    let norm = train.compute_norm();

    let train_path = out_dir.join("train.csv");
    let val_path = out_dir.join("val.csv");
    let test_path = out_dir.join("test.csv");
    write_csv(&train_path, &train, "label")?;
    write_csv(&val_path, &val, "label")?;
    write_csv(&test_path, &test, "label")?;

    let manifest = DatasetManifest {
        channels: train.channel_names.clone(),
        label_column: "label".into(),
        delimiter: ',',
        sample_rate_hz: file_spec.spec.sample_rate_hz,
        classes: file_spec.spec.num_classes(),
        window: file_spec.window,
        train_file: "train.csv".into(),
        val_file: "val.csv".into(),
        test_file: "test.csv".into(),
        norm,
        seed,
    };
    let manifest_path = out_dir.join("dataset.manifest");
    write_atomic(&manifest_path, manifest.to_text().as_bytes())?;

    write_manifest(
        &out_dir.join("manifest.json"),
        &RunManifest {
            command: "synth".into(),
            config: serde_json::to_value(&file_spec)
                .map_err(|e| Error::Data(format!("config snapshot: {e}")))?,
            seed,
            inputs: vec![sha256_of(spec_path)?],
            outputs: vec![
                sha256_of(&train_path)?,
                sha256_of(&val_path)?,
                sha256_of(&test_path)?,
                sha256_of(&manifest_path)?,
            ],
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            epoch_seconds: None,
        },
    )?;
    println!(
        "wrote {} samples ({} train / {} val / {} test) to {}",
        file_spec.train_samples + file_spec.val_samples + file_spec.test_samples,
        file_spec.train_samples,
        file_spec.val_samples,
        file_spec.test_samples,
        out_dir.display()
    );
    Ok(())
}

struct TrainArgs {
    data: PathBuf,
    variant: String,
    epochs: Option<usize>,
    lr: Option<f64>,
    lr_decay: Option<f64>,
    batch: Option<usize>,
    seed: Option<u64>,
    dropout: Option<f64>,
    patience: Option<usize>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
}

/// Optional TOML training config; CLI flags take precedence over it, and it
/// takes precedence over built-in defaults.
#[derive(Debug, Default, Deserialize)]
struct TrainFileConfig {
    epochs: Option<usize>,
    lr: Option<f64>,
    lr_decay: Option<f64>,
    batch: Option<usize>,
    seed: Option<u64>,
    dropout: Option<f64>,
    patience: Option<usize>,
    include_null_in_mean: Option<bool>,
    filters: Option<usize>,
    hidden: Option<usize>,
    kernel_len: Option<usize>,
    conv_layers: Option<usize>,
    attention_score_hidden: Option<usize>,
}

#[derive(Debug, Serialize)]
struct TrainConfigSnapshot {
    variant: Variant,
    epochs: usize,
    lr: f64,
    lr_decay: f64,
    batch: usize,
    seed: u64,
    dropout: f64,
    patience: usize,
    include_null_in_mean: bool,
    arch: ArchConfig,
    data: String,
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let started = Instant::now();
    let variant: Variant = args.variant.parse()?;
    let file_config: TrainFileConfig = match &args.config {
        None => TrainFileConfig::default(),
        Some(path) => {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "train config file not found: {}",
                    path.display()
                )));
            }
            toml::from_str(&fs::read_to_string(path)?)
                .map_err(|e| Error::Config(format!("bad train config: {e}")))?
        }
    };

    let defaults = TrainConfig::new(variant, 42);
    let config = TrainConfig {
        epochs: args.epochs.or(file_config.epochs).unwrap_or(defaults.epochs),
        batch_size: args.batch.or(file_config.batch).unwrap_or(defaults.batch_size),
        lr: args.lr.or(file_config.lr).unwrap_or(defaults.lr),
        lr_decay: args.lr_decay.or(file_config.lr_decay).unwrap_or(defaults.lr_decay),
        seed: args.seed.or(file_config.seed).unwrap_or(defaults.seed),
        dropout_p: args.dropout.or(file_config.dropout).unwrap_or(defaults.dropout_p),
        variant,
        patience: args.patience.or(file_config.patience).unwrap_or(defaults.patience),
        rms_alpha: defaults.rms_alpha,
        rms_epsilon: defaults.rms_epsilon,
        include_null_in_mean: file_config
            .include_null_in_mean
            .unwrap_or(defaults.include_null_in_mean),
    };

    let bundle = load_bundle(&args.data)?;
    let mut arch = ArchConfig::new(bundle.manifest.channels.len(), bundle.manifest.classes, variant);
    arch.window = bundle.manifest.window;
    if let Some(f) = file_config.filters {
        arch.filters = f;
    }
    if let Some(h) = file_config.hidden {
        arch.hidden = h;
    }
    if let Some(k) = file_config.kernel_len {
        arch.kernel_len = k;
    }
    if let Some(c) = file_config.conv_layers {
        arch.conv_layers = c;
    }
    arch.attention_score_hidden = file_config.attention_score_hidden;

    let out_dir = default_out_dir(args.out);
    fs::create_dir_all(&out_dir)?;

    let outcome = training::train(&arch, &config, &bundle.train, &bundle.val)?;

    let ckpt_path = out_dir.join("model.ckpt");
    save_checkpoint(&ckpt_path, &outcome.checkpoint)?;
    let log_path = out_dir.join("train_log.jsonl");
    write_atomic(&log_path, outcome.log_jsonl().as_bytes())?;

    let snapshot = TrainConfigSnapshot {
        variant,
        epochs: config.epochs,
        lr: config.lr,
        lr_decay: config.lr_decay,
        batch: config.batch_size,
        seed: config.seed,
        dropout: config.dropout_p,
        patience: config.patience,
        include_null_in_mean: config.include_null_in_mean,
        arch: arch.clone(),
        data: args.data.display().to_string(),
    };
    let mut inputs = vec![sha256_of(&args.data)?];
    if let Some(cfg) = &args.config {
        inputs.push(sha256_of(cfg)?);
    }
    write_manifest(
        &out_dir.join("manifest.json"),
        &RunManifest {
            command: "train".into(),
            config: serde_json::to_value(&snapshot)
                .map_err(|e| Error::Data(format!("config snapshot: {e}")))?,
            seed: config.seed,
            inputs,
            outputs: vec![sha256_of(&ckpt_path)?, sha256_of(&log_path)?],
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            epoch_seconds: Some(outcome.epoch_seconds.clone()),
        },
    )?;

    println!(
        "trained {:?} for {} epoch(s); best val mean F1 {:.4} at epoch {}; checkpoint {}",
        variant,
        outcome.log.len(),
        outcome.best_val_f1.max(0.0),
        outcome.checkpoint.epoch,
        ckpt_path.display()
    );
    Ok(())
}

fn check_compatibility(arch: &ArchConfig, manifest: &DatasetManifest) -> Result<()> {
    let expected = [arch.window, arch.channels, arch.classes];
    let found = [manifest.window, manifest.channels.len(), manifest.classes];
    if expected != found {
        return Err(Error::ShapeMismatch {
            op: "checkpoint/dataset compatibility (window, channels, classes)",
            left: expected.to_vec(),
            right: found.to_vec(),
        });
    }
    Ok(())
}

fn cmd_eval(checkpoint: &Path, data: &Path, report_path: &Path) -> Result<()> {
    let started = Instant::now();
    if !checkpoint.exists() {
        return Err(Error::Config(format!(
            "checkpoint not found: {}",
            checkpoint.display()
        )));
    }
    let ckpt = load_checkpoint(checkpoint)?;
    let bundle = load_bundle(data)?;
    check_compatibility(&ckpt.params.config, &bundle.manifest)?;

    let (report, _) = evaluation::evaluate(&ckpt.params, &bundle.test, true)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Data(format!("report serialization: {e}")))?;
    write_atomic(report_path, format!("{json}\n").as_bytes())?;

    write_manifest(
        &report_path.with_extension("manifest.json"),
        &RunManifest {
            command: "eval".into(),
            config: serde_json::json!({
                "checkpoint": checkpoint.display().to_string(),
                "data": data.display().to_string(),
            }),
            seed: ckpt.seed,
            inputs: vec![sha256_of(checkpoint)?, sha256_of(data)?],
            outputs: vec![sha256_of(report_path)?],
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            epoch_seconds: None,
        },
    )?;

    println!(
        "evaluated {} samples: mean F1 {:.4}, accuracy {:.4} (95% interval {:.4}..{:.4})",
        report.n_samples, report.mean_f1, report.accuracy, report.wilson_low, report.wilson_high
    );
    Ok(())
}

fn cmd_attention_dump(checkpoint: &Path, data: &Path, csv_path: &Path) -> Result<()> {
    let started = Instant::now();
    if !checkpoint.exists() {
        return Err(Error::Config(format!(
            "checkpoint not found: {}",
            checkpoint.display()
        )));
    }
    let ckpt = load_checkpoint(checkpoint)?;
    let bundle = load_bundle(data)?;
    check_compatibility(&ckpt.params.config, &bundle.manifest)?;

    let summary = evaluation::attention_summary(&ckpt.params, &bundle.test)?;
    write_atomic(csv_path, summary.to_csv().as_bytes())?;

    write_manifest(
        &csv_path.with_extension("manifest.json"),
        &RunManifest {
            command: "attention-dump".into(),
            config: serde_json::json!({
                "checkpoint": checkpoint.display().to_string(),
                "data": data.display().to_string(),
            }),
            seed: ckpt.seed,
            inputs: vec![sha256_of(checkpoint)?, sha256_of(data)?],
            outputs: vec![sha256_of(csv_path)?],
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            epoch_seconds: None,
        },
    )?;

    println!(
        "wrote per-class attention medians for {} class(es) to {}",
        summary.rows.len(),
        csv_path.display()
    );
    Ok(())
}

fn cmd_gradcheck(tolerance: f64) -> Result<()> {
    let report = training::gradcheck(tolerance)?;
    print!("{}", report.render());
    if report.passed() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: "gradient check failed; see table above".into(),
        })
    }
}
