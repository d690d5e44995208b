//! Differentiable building blocks: temporal convolution, linear, dropout,
//! and a stacked LSTM. Each block has a forward pass that returns a cache and
//! a backward pass that is the exact adjoint of the forward map.

mod conv;
mod dropout;
mod linear;
mod lstm;

pub use conv::{ConvCache, ConvGrads, ConvLayer};
pub use dropout::{Dropout, DropoutMask};
pub use linear::{LinearCache, LinearGrads, LinearLayer};
pub use lstm::{lstm_backward, lstm_forward, LstmGrads, LstmLayer, LstmLayerCache};

/// Whether stochastic layers (dropout) are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization used by every
/// weight matrix in the crate.
pub(crate) fn init_uniform(data: &mut [f64], fan_in: usize, rng: &mut crate::ndcore::Rng) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    for w in data.iter_mut() {
        *w = rng.uniform(-bound, bound);
    }
}
