//! Inspecting what the attention head learned: per-frame weight traces over
//! the seven historical hidden states, condensed into per-class medians.
//!
//! ```bash
//! cargo run --example attention_weights
//! ```

use har_attn::attention::{attend_forward, AttentionParams};
use har_attn::data::{synth_generate, SplitTag, SynthSpec};
use har_attn::evaluation::attention_summary;
use har_attn::model::{ArchConfig, Variant};
use har_attn::ndcore::{Rng, Tensor};
use har_attn::training::{train, TrainConfig};

fn main() {
    // The attention head in isolation: identical history states get uniform
    // weights; the final state always rides the skip connection.
    let mut rng = Rng::new(1);
    let params = AttentionParams::init(8, None, &mut rng).unwrap();
    let v = Tensor::filled(&[8], 0.25).unwrap();
    let mut states = vec![v; 7];
    states.push(Tensor::filled(&[8], -1.0).unwrap());
    let (_, weights, _) = attend_forward(&params, &states).unwrap();
    println!("identical history -> uniform weights: {weights:?}");

    // On a trained model the weights become class-dependent.
    let spec = SynthSpec::four_class_benchmark();
    let mut rng = Rng::new(23);
    let train_ds = synth_generate(&mut rng, &spec, 6_000, SplitTag::Train).unwrap();
    let val_ds = synth_generate(&mut rng, &spec, 1_200, SplitTag::Val).unwrap();
    let test_ds = synth_generate(&mut rng, &spec, 1_500, SplitTag::Test).unwrap();

    let mut arch = ArchConfig::new(spec.channels, spec.num_classes(), Variant::Attention);
    arch.filters = 16;
    arch.hidden = 32;
    let mut config = TrainConfig::new(Variant::Attention, 3);
    config.epochs = 6;
    config.dropout_p = 0.3;
    let outcome = train(&arch, &config, &train_ds, &val_ds).unwrap();

    let summary = attention_summary(&outcome.checkpoint.params, &test_ds).unwrap();
    println!("per-class medians over {} weights:", summary.weights_len);
    print!("{}", summary.to_csv());
    println!("(rows are classes; columns w1..w7 weight the oldest..newest history state)");
}
