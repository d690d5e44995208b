//! Sequence-learning engine for wearable-sensor activity recognition.
//!
//! The crate builds, trains, and evaluates two closely related networks over
//! windowed multichannel time series: a convolutional-recurrent baseline
//! (four temporal conv layers into a two-layer LSTM) and a variant that adds
//! a temporal attention head over the LSTM's hidden states. Everything is
//! implemented from first principles on a small dense-tensor core with exact
//! hand-written adjoints, so gradients can be audited against finite
//! differences end to end.
//!
//! Module map:
//! - [`ndcore`] — dense tensors, deterministic SplitMix64 randomness
//! - [`layers`] — conv / linear / dropout / LSTM with forward+backward
//! - [`attention`] — temporal attention with skip connection
//! - [`model`] — the assembled networks, loss, checkpoints
//! - [`data`] — CSV ingestion, sliding-window frames, synthetic generator
//! - [`training`] — RMSProp loop, learning-rate decay, gradient checking
//! - [`evaluation`] — sample-wise predictions, macro F1, Wilson intervals,
//!   attention-weight summaries
//! - [`cli`] — the `har-attn` binary's subcommands
//!
//! Run `cargo run --example pipeline` for an end-to-end tour, or see the
//! other examples for one capability each.

pub mod attention;
pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod layers;
pub mod model;
pub mod ndcore;
pub mod training;

pub use error::{Error, Result};
pub use ndcore::{Rng, Tensor};
