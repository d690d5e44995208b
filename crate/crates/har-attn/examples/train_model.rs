//! Training loop basics: RMSProp with per-epoch learning-rate decay,
//! shuffled mini-batches, and best-validation checkpointing.
//!
//! ```bash
//! cargo run --example train_model
//! ```

use har_attn::data::{synth_generate, SplitTag, SynthSpec};
use har_attn::model::{ArchConfig, Variant};
use har_attn::ndcore::Rng;
use har_attn::training::{train, TrainConfig};

fn main() {
    let spec = SynthSpec::four_class_benchmark();
    let mut rng = Rng::new(3);
    let train_ds = synth_generate(&mut rng, &spec, 4_000, SplitTag::Train).unwrap();
    let val_ds = synth_generate(&mut rng, &spec, 1_000, SplitTag::Val).unwrap();

    let mut arch = ArchConfig::new(spec.channels, spec.num_classes(), Variant::Baseline);
    arch.filters = 8;
    arch.hidden = 16;

    // Defaults follow the reference protocol (lr 0.001 decayed per epoch,
    // batch 100); scaled down here for a quick run.
    let mut config = TrainConfig::new(Variant::Baseline, 42);
    config.epochs = 8;
    config.batch_size = 50;
    config.dropout_p = 0.2;
    config.patience = 3;

    let outcome = train(&arch, &config, &train_ds, &val_ds).unwrap();
    println!("epoch  lr        train_loss  val_mean_f1");
    for r in &outcome.log {
        println!(
            "{:5}  {:.6}  {:10.4}  {:11.4}",
            r.epoch, r.lr, r.train_loss, r.val_mean_f1
        );
    }
    println!(
        "kept checkpoint from epoch {} (val mean F1 {:.4}); {} parameters",
        outcome.checkpoint.epoch,
        outcome.best_val_f1,
        outcome.checkpoint.params.num_params()
    );

    // The training log is emitted as JSON lines for downstream tooling.
    println!("--- log as JSONL ---");
    print!("{}", outcome.log_jsonl());
}
