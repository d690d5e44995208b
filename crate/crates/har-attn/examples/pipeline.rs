//! End-to-end tour: generate a synthetic dataset, train the attention
//! variant, evaluate sample-wise, and summarize the learned attention
//! weights. Everything runs in-process on a desk-scale problem.
//!
//! ```bash
//! cargo run --release --example pipeline
//! ```

use har_attn::data::{synth_generate, SplitTag, SynthSpec};
use har_attn::evaluation;
use har_attn::model::{ArchConfig, Variant};
use har_attn::ndcore::Rng;
use har_attn::training::{train, TrainConfig};

fn main() {
    let spec = SynthSpec::four_class_benchmark();
    let mut rng = Rng::new(2024);
    let mut train_ds = synth_generate(&mut rng, &spec, 6_000, SplitTag::Train).unwrap();
    let mut val_ds = synth_generate(&mut rng, &spec, 1_500, SplitTag::Val).unwrap();
    let mut test_ds = synth_generate(&mut rng, &spec, 1_500, SplitTag::Test).unwrap();
    let stats = train_ds.compute_norm();
    train_ds.standardize(&stats).unwrap();
    val_ds.standardize(&stats).unwrap();
    test_ds.standardize(&stats).unwrap();
    println!(
        "dataset: {} train / {} val / {} test samples, {} channels, {} classes",
        train_ds.len(),
        val_ds.len(),
        test_ds.len(),
        train_ds.channels(),
        spec.num_classes()
    );

    // Scaled-down architecture so the example finishes in well under a
    // minute; drop the overrides for the full-size network.
    let mut arch = ArchConfig::new(spec.channels, spec.num_classes(), Variant::Attention);
    arch.filters = 16;
    arch.hidden = 32;

    let mut config = TrainConfig::new(Variant::Attention, 7);
    config.epochs = 6;
    config.dropout_p = 0.3;

    let outcome = train(&arch, &config, &train_ds, &val_ds).unwrap();
    for record in &outcome.log {
        println!(
            "epoch {:2}  lr {:.6}  train loss {:.4}  val mean F1 {:.4}",
            record.epoch, record.lr, record.train_loss, record.val_mean_f1
        );
    }

    let (report, _) = evaluation::evaluate(&outcome.checkpoint.params, &test_ds, true).unwrap();
    println!(
        "test: mean F1 {:.4}, accuracy {:.4}, 95% Wilson interval [{:.4}, {:.4}]",
        report.mean_f1, report.accuracy, report.wilson_low, report.wilson_high
    );

    let summary = evaluation::attention_summary(&outcome.checkpoint.params, &test_ds).unwrap();
    println!("per-class median attention weights (w1..w7):");
    print!("{}", summary.to_csv());
}
