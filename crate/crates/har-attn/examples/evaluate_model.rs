//! Sample-wise evaluation: overlapping frame predictions are averaged per
//! sample, then scored with a confusion matrix, per-class F1, macro F1, and
//! a Wilson interval on sample accuracy.
//!
//! ```bash
//! cargo run --example evaluate_model
//! ```

use har_attn::data::{synth_generate, SplitTag, SynthSpec};
use har_attn::evaluation::{evaluate, macro_f1, wilson_interval};
use har_attn::model::{ArchConfig, Variant};
use har_attn::ndcore::Rng;
use har_attn::training::{train, TrainConfig};

fn main() {
    // The metric layer stands on its own: here on hand-made labels...
    let report = macro_f1(&[0, 0, 1, 1], &[0, 1, 1, 1], 2, true).unwrap();
    println!(
        "toy example: per-class F1 {:?}, mean F1 {:.4}",
        report.per_class.iter().map(|m| m.f1).collect::<Vec<_>>(),
        report.mean_f1
    );
    let (low, high) = wilson_interval(50, 100).unwrap();
    println!("Wilson 95% for 50/100: [{low:.4}, {high:.4}]");

    // ...and on a trained model.
    let spec = SynthSpec::four_class_benchmark();
    let mut rng = Rng::new(17);
    let train_ds = synth_generate(&mut rng, &spec, 5_000, SplitTag::Train).unwrap();
    let val_ds = synth_generate(&mut rng, &spec, 1_000, SplitTag::Val).unwrap();
    let test_ds = synth_generate(&mut rng, &spec, 1_500, SplitTag::Test).unwrap();

    let mut arch = ArchConfig::new(spec.channels, spec.num_classes(), Variant::Attention);
    arch.filters = 16;
    arch.hidden = 32;
    let mut config = TrainConfig::new(Variant::Attention, 5);
    config.epochs = 6;
    config.dropout_p = 0.3;
    let outcome = train(&arch, &config, &train_ds, &val_ds).unwrap();

    let (report, _) = evaluate(&outcome.checkpoint.params, &test_ds, true).unwrap();
    println!(
        "trained model on {} test samples: accuracy {:.4} in [{:.4}, {:.4}]",
        report.n_samples, report.accuracy, report.wilson_low, report.wilson_high
    );
    for m in &report.per_class {
        println!(
            "class {}: support {:5}  precision {:.4}  recall {:.4}  F1 {:.4}",
            m.class, m.support, m.precision, m.recall, m.f1
        );
    }
    println!("mean F1 {:.4}", report.mean_f1);
    println!("--- report as JSON ---");
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
