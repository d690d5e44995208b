//! Acceptance suite: one test per shipping criterion, each printing a
//! pass/fail line. The training-based criteria share one synthetic benchmark
//! (20k train / 4k val / 5k test samples, six channels, four classes with
//! class-dependent durations and >= 6 dB SNR).
//!
//! Run with:
//!
//! ```bash
//! cargo test --test acceptance -- --nocapture
//! ```

use std::sync::OnceLock;
use std::time::Instant;

use har_attn::attention::{attend_backward, attend_forward, AttentionParams};
use har_attn::data::{synth_generate, SplitTag, SynthSpec, TimeSeriesDataset};
use har_attn::evaluation::{self, attention_summary, macro_f1, wilson_interval};
use har_attn::layers::ConvLayer;
use har_attn::model::{ArchConfig, ModelParams, Variant};
use har_attn::ndcore::{Rng, Tensor};
use har_attn::training::{gradcheck, train, TrainConfig};

fn benchmark_datasets(seed: u64) -> (TimeSeriesDataset, TimeSeriesDataset, TimeSeriesDataset) {
    let spec = SynthSpec::four_class_benchmark();
    let mut rng = Rng::new(1000 + seed);
    let mut train_ds = synth_generate(&mut rng, &spec, 20_000, SplitTag::Train).unwrap();
    let mut val_ds = synth_generate(&mut rng, &spec, 8_000, SplitTag::Val).unwrap();
    let mut test_ds = synth_generate(&mut rng, &spec, 5_000, SplitTag::Test).unwrap();
    let stats = train_ds.compute_norm();
    train_ds.standardize(&stats).unwrap();
    val_ds.standardize(&stats).unwrap();
    test_ds.standardize(&stats).unwrap();
    (train_ds, val_ds, test_ds)
}

fn train_benchmark(variant: Variant, seed: u64, epochs: usize) -> (ModelParams, f64) {
    let (train_ds, val_ds, test_ds) = benchmark_datasets(seed);
    let arch = ArchConfig::new(6, 4, variant);
    let mut config = TrainConfig::new(variant, seed);
    config.epochs = epochs;
    config.patience = epochs; // fixed budget, identical for both variants
    let outcome = train(&arch, &config, &train_ds, &val_ds).unwrap();
    let (report, _) = evaluation::evaluate(&outcome.checkpoint.params, &test_ds, true).unwrap();
    (outcome.checkpoint.params, report.mean_f1)
}

struct TrainedBenchmark {
    params: ModelParams,
    test_ds: TimeSeriesDataset,
    mean_f1: f64,
    train_seconds: f64,
    epochs_run: usize,
}

/// Criterion-4 training run, shared with criterion 7.
fn c4_artifacts() -> &'static TrainedBenchmark {
    static CELL: OnceLock<TrainedBenchmark> = OnceLock::new();
    CELL.get_or_init(|| {
        let (train_ds, val_ds, test_ds) = benchmark_datasets(1);
        let arch = ArchConfig::new(6, 4, Variant::Attention);
        // The reference protocol's defaults: lr 0.001 decayed per epoch,
        // batch 100, 30-epoch budget. Patience spans the whole budget so the
        // run measures what the budget itself can reach.
        let mut config = TrainConfig::new(Variant::Attention, 1);
        config.patience = config.epochs;
        let started = Instant::now();
        let outcome = train(&arch, &config, &train_ds, &val_ds).unwrap();
        let train_seconds = started.elapsed().as_secs_f64();
        let (report, _) = evaluation::evaluate(&outcome.checkpoint.params, &test_ds, true).unwrap();
        TrainedBenchmark {
            params: outcome.checkpoint.params,
            test_ds,
            mean_f1: report.mean_f1,
            train_seconds,
            epochs_run: outcome.log.len(),
        }
    })
}

#[test]
fn c1_gradient_correctness() {
    let started = Instant::now();
    let report = gradcheck(1e-4).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let worst = report
        .entries
        .iter()
        .map(|e| e.max_rel_error)
        .fold(0.0f64, f64::max);
    let pass = report.passed() && elapsed < 60.0;
    println!(
        "criterion 1 (gradient correctness): {} — {} groups, worst rel err {:.2e}, {:.1}s",
        if pass { "PASS" } else { "FAIL" },
        report.entries.len(),
        worst,
        elapsed
    );
    for entry in report.entries.iter().filter(|e| e.target == "linear" || e.target == "conv") {
        assert!(
            entry.max_rel_error <= 1e-6,
            "linear-path group {} exceeded 1e-6: {}",
            entry.group,
            entry.max_rel_error
        );
    }
    assert!(report.passed(), "\n{}", report.render());
    assert!(elapsed < 60.0, "gradcheck took {elapsed:.1}s, budget is 60s");
}

#[test]
fn c2_attention_algebra() {
    let mut rng = Rng::new(777);
    let dim = 16;
    for trial in 0..1000 {
        let params = AttentionParams::init(dim, None, &mut rng).unwrap();
        let states: Vec<Tensor> = (0..8)
            .map(|_| {
                Tensor::new(
                    &[dim],
                    (0..dim).map(|_| rng.uniform(-2.0, 2.0)).collect(),
                )
                .unwrap()
            })
            .collect();

        // Weights sum to 1 within 1e-9 and are strictly positive.
        let (final_a, weights, cache) = attend_forward(&params, &states).unwrap();
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9, "trial {trial}");
        assert!(weights.iter().all(|&w| w > 0.0));

        // Symmetry: permuting the history permutes the weights identically.
        let perm = [4usize, 2, 6, 0, 5, 1, 3];
        let mut permuted: Vec<Tensor> = perm.iter().map(|&i| states[i].clone()).collect();
        permuted.push(states[7].clone());
        let (final_b, weights_b, _) = attend_forward(&params, &permuted).unwrap();
        for (slot, &src) in perm.iter().enumerate() {
            assert!((weights_b[slot] - weights[src]).abs() < 1e-12);
        }
        for (a, b) in final_a.data().iter().zip(final_b.data()) {
            assert!((a - b).abs() < 1e-12);
        }

        // Shift invariance: moving the score bias leaves weights unchanged.
        let mut shifted = params.clone();
        shifted.b2.data_mut()[0] += rng.uniform(-40.0, 40.0);
        let (_, weights_c, _) = attend_forward(&shifted, &states).unwrap();
        for (a, b) in weights.iter().zip(&weights_c) {
            assert!((a - b).abs() < 1e-12);
        }

        // Skip identity: the final state's gradient is the upstream gradient.
        let grad: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let (grad_h, _) =
            attend_backward(&params, &cache, &Tensor::vector(&grad).unwrap()).unwrap();
        assert_eq!(grad_h.last().unwrap().data(), grad.as_slice());

        // One-hot selection: saturating the score path on a crafted instance
        // concentrates all weight on the chosen state.
        let chosen = (trial % 7) as usize;
        let mut sat = AttentionParams::init(dim, None, &mut Rng::new(1)).unwrap();
        for v in sat.w1.data_mut() {
            *v = 0.0;
        }
        for k in 0..dim {
            sat.w1.data_mut()[k * dim + k] = 50.0;
        }
        for v in sat.b1.data_mut() {
            *v = 0.0;
        }
        for v in sat.w2.data_mut() {
            *v = 0.0;
        }
        sat.w2.data_mut()[0] = 60.0;
        sat.b2.data_mut()[0] = 0.0;
        let mut crafted = vec![Tensor::zeros(&[dim]).unwrap(); 8];
        let mut spike = Tensor::zeros(&[dim]).unwrap();
        spike.data_mut()[0] = 1.0;
        crafted[chosen] = spike.clone();
        crafted[7] = Tensor::new(&[dim], (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let (sel_final, sel_weights, _) = attend_forward(&sat, &crafted).unwrap();
        assert!(sel_weights[chosen] > 0.999_999, "trial {trial}");
        for k in 0..dim {
            let want = spike.data()[k] + crafted[7].data()[k];
            assert!((sel_final.data()[k] - want).abs() < 1e-4);
        }
    }
    println!("criterion 2 (attention algebra): PASS — 1000 random instances");
}

#[test]
fn c3_architecture_arithmetic() {
    // Four valid kernel-5 convolutions map 24 timesteps to exactly 8.
    let mut rng = Rng::new(5);
    let layers: Vec<ConvLayer> = (0..4)
        .map(|_| ConvLayer::init(64, 5, &mut rng).unwrap())
        .collect();
    let mut x = Tensor::filled(&[24, 1], 0.1).unwrap();
    for layer in &layers {
        x = layer.forward(&x).unwrap().0.relu().unwrap();
    }
    assert_eq!(x.shape(), &[8, 64]);

    // Parameter counts match the closed form exactly, for both variants and
    // the optional intermediate score stage.
    let mut checked = 0;
    for variant in [Variant::Baseline, Variant::Attention] {
        for score_hidden in [None, Some(64)] {
            let mut arch = ArchConfig::new(6, 4, variant);
            arch.attention_score_hidden = score_hidden;
            let params = ModelParams::init(&arch, &mut Rng::new(9)).unwrap();
            assert_eq!(
                params.num_params(),
                arch.param_count(),
                "{variant:?} score_hidden={score_hidden:?}"
            );
            checked += 1;
        }
    }
    println!(
        "criterion 3 (architecture arithmetic): PASS — 24 -> 8 timesteps, {checked} parameter counts exact"
    );
}

#[test]
fn c4_desk_scale_learning() {
    let bench = c4_artifacts();
    let pass = bench.mean_f1 >= 0.90 && bench.train_seconds < 900.0;
    println!(
        "criterion 4 (desk-scale learning): {} — attention mean F1 {:.4} after {} epochs in {:.0}s",
        if pass { "PASS" } else { "FAIL" },
        bench.mean_f1,
        bench.epochs_run,
        bench.train_seconds
    );
    assert!(
        bench.mean_f1 >= 0.90,
        "attention variant reached only {:.4}",
        bench.mean_f1
    );
    assert!(
        bench.train_seconds < 900.0,
        "training took {:.0}s, budget is 900s",
        bench.train_seconds
    );
}

#[test]
fn c5_relative_improvement_direction() {
    let seeds = [1u64, 2, 3];
    let epochs = 8;
    let mut att_scores = Vec::new();
    let mut base_scores = Vec::new();
    for &seed in &seeds {
        att_scores.push(train_benchmark(Variant::Attention, seed, epochs).1);
        base_scores.push(train_benchmark(Variant::Baseline, seed, epochs).1);
    }
    let mean_att: f64 = att_scores.iter().sum::<f64>() / 3.0;
    let mean_base: f64 = base_scores.iter().sum::<f64>() / 3.0;
    let strict_wins = att_scores
        .iter()
        .zip(&base_scores)
        .filter(|(a, b)| a > b)
        .count();
    let pass = mean_att >= mean_base - 0.02 && strict_wins >= 2;
    println!(
        "criterion 5 (relative improvement): {} — attention {:?} vs baseline {:?}; means {:.4} vs {:.4}; strict wins {}/3",
        if pass { "PASS" } else { "FAIL" },
        att_scores.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
        base_scores.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
        mean_att,
        mean_base,
        strict_wins
    );
    assert!(
        mean_att >= mean_base - 0.02,
        "attention mean {mean_att:.4} fell more than 0.02 below baseline mean {mean_base:.4}"
    );
    assert!(
        strict_wins >= 2,
        "attention won only {strict_wins}/3 seeds strictly (att {att_scores:?}, base {base_scores:?})"
    );
}

#[test]
fn c6_metric_oracles() {
    let report = macro_f1(&[0, 0, 1, 1], &[0, 1, 1, 1], 2, true).unwrap();
    assert!((report.mean_f1 - 0.7333).abs() < 1e-3);
    let (low, high) = wilson_interval(50, 100).unwrap();
    assert!((low - 0.4038).abs() < 1e-3 && (high - 0.5962).abs() < 1e-3);
    println!(
        "criterion 6 (metric oracles): PASS — macro F1 {:.4}, Wilson [{:.4}, {:.4}]",
        report.mean_f1, low, high
    );
}

#[test]
fn c7_attention_weight_export() {
    let bench = c4_artifacts();
    let summary = attention_summary(&bench.params, &bench.test_ds).unwrap();

    // Well-formed CSV: header plus one row of 7 medians per class.
    let csv = summary.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("class,w1,w2,w3,w4,w5,w6,w7"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4, "expected one row per class:\n{csv}");
    for row in &rows {
        assert_eq!(row.split(',').count(), 8);
    }

    // Per-frame traces sum to 1 within 1e-9 (revalidated against the raw
    // traces, not just the medians).
    let (_, traces) = evaluation::evaluate(&bench.params, &bench.test_ds, true).unwrap();
    assert!(!traces.is_empty());
    for trace in &traces {
        assert!((trace.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    // The first two history states never dominate the last one.
    let mut worst: Vec<String> = Vec::new();
    for (class, medians) in &summary.rows {
        let (w1, w2, w7) = (medians[0], medians[1], medians[6]);
        if w1 > w7 || w2 > w7 {
            worst.push(format!("class {class}: w1={w1:.4} w2={w2:.4} w7={w7:.4}"));
        }
    }
    println!(
        "criterion 7 (attention export): {} — per-class medians\n{}",
        if worst.is_empty() { "PASS" } else { "FAIL" },
        csv.trim_end()
    );
    assert!(
        worst.is_empty(),
        "early history states outweigh the last state: {worst:?}"
    );
}

#[test]
fn c8_determinism() {
    use std::fs;
    use std::process::Command;

    let dir = tempfile::tempdir().unwrap();
    let spec = r#"
channels = 2
sample_rate_hz = 24.0
noise_std = 0.1
train_samples = 1200
val_samples = 720
test_samples = 480
window = 24

[[classes]]
duration_min = 120
duration_max = 240
freq_hz = 1.0
amp = 1.0
base_offset = 0.8

[[classes]]
duration_min = 120
duration_max = 240
freq_hz = 5.0
amp = 1.0
base_offset = -0.8
"#;
    let spec_path = dir.path().join("spec.toml");
    fs::write(&spec_path, spec).unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    fs::write(&cfg_path, "filters = 8\nhidden = 16\nepochs = 2\nbatch = 20\n").unwrap();

    let run = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_har-attn"))
            .args(args)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };

    for tag in ["x", "y"] {
        run(&[
            "synth",
            "--spec",
            spec_path.to_str().unwrap(),
            "--seed",
            "9",
            "--out",
            &format!("data_{tag}"),
        ]);
        run(&[
            "train",
            "--data",
            &format!("data_{tag}/dataset.manifest"),
            "--variant",
            "attention",
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "13",
            "--out",
            &format!("run_{tag}"),
        ]);
        run(&[
            "eval",
            "--checkpoint",
            &format!("run_{tag}/model.ckpt"),
            "--data",
            &format!("data_{tag}/dataset.manifest"),
            "--report",
            &format!("run_{tag}/report.json"),
        ]);
    }

    let pairs = [
        ("data_x/train.csv", "data_y/train.csv"),
        ("data_x/val.csv", "data_y/val.csv"),
        ("data_x/test.csv", "data_y/test.csv"),
        ("data_x/dataset.manifest", "data_y/dataset.manifest"),
        ("run_x/model.ckpt", "run_y/model.ckpt"),
        ("run_x/train_log.jsonl", "run_y/train_log.jsonl"),
        ("run_x/report.json", "run_y/report.json"),
    ];
    for (a, b) in pairs {
        let ba = fs::read(dir.path().join(a)).unwrap();
        let bb = fs::read(dir.path().join(b)).unwrap();
        assert_eq!(ba, bb, "{a} and {b} differ across identical seeded runs");
    }
    println!("criterion 8 (determinism): PASS — checkpoints, logs, datasets, and reports byte-identical");
}
