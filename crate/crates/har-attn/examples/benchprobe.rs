// Temporary probe for benchmark timing and learning curves.
use har_attn::data::{synth_generate, SplitTag, SynthSpec};
use har_attn::evaluation;
use har_attn::model::{ArchConfig, Variant};
use har_attn::ndcore::Rng;
use har_attn::training::{train, TrainConfig};
use std::time::Instant;

fn main() {
    let spec = SynthSpec::four_class_benchmark();
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let variant = match args.get(2).map(|s| s.as_str()) {
        Some("baseline") => Variant::Baseline,
        _ => Variant::Attention,
    };
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(8);
    let dropout: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.5);

    let mut rng = Rng::new(1000 + seed);
    let train_ds = synth_generate(&mut rng, &spec, 20_000, SplitTag::Train).unwrap();
    let val_ds = synth_generate(&mut rng, &spec, 8_000, SplitTag::Val).unwrap();
    let test_ds = synth_generate(&mut rng, &spec, 5_000, SplitTag::Test).unwrap();

    let arch = ArchConfig::new(6, 4, variant);
    let mut config = TrainConfig::new(variant, seed);
    config.epochs = epochs;
    config.patience = epochs;
    config.dropout_p = dropout;

    let started = Instant::now();
    let outcome = train(&arch, &config, &train_ds, &val_ds).unwrap();
    for (r, secs) in outcome.log.iter().zip(&outcome.epoch_seconds) {
        println!(
            "epoch {:2}  lr {:.6}  loss {:.4}  val_f1 {:.4}  {:.1}s",
            r.epoch, r.lr, r.train_loss, r.val_mean_f1, secs
        );
    }
    let (report, _) = evaluation::evaluate(&outcome.checkpoint.params, &test_ds, true).unwrap();
    println!(
        "variant={variant:?} seed={seed} dropout={dropout} best_epoch={} test_mean_f1={:.4} acc={:.4} total={:.0}s",
        outcome.checkpoint.epoch,
        report.mean_f1,
        report.accuracy,
        started.elapsed().as_secs_f64()
    );
    if variant == Variant::Attention {
        let summary = evaluation::attention_summary(&outcome.checkpoint.params, &test_ds).unwrap();
        for (class, medians) in &summary.rows {
            let cells: Vec<String> = medians.iter().map(|m| format!("{m:.4}")).collect();
            println!("class {class} medians: {}", cells.join(" "));
        }
    }
}
