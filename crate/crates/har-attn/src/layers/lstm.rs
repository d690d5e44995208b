//! Stacked LSTM over short sequences, with exact backpropagation through time.
//!
//! Gate blocks are stored stacked in one `4H x *` matrix per input, ordered
//! input, forget, candidate, output:
//!
//! ```text
//! a   = W_ih x_t + W_hh h_{t-1} + b
//! i,f = sigmoid(a[0..H]), sigmoid(a[H..2H])
//! g,o = tanh(a[2H..3H]),  sigmoid(a[3H..4H])
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```
//!
//! States start at zero for every sequence; layers are stateless across calls.

use crate::error::{Error, Result};
use crate::ndcore::{axpy, dot, sigmoid, Rng, Tensor};

#[derive(Debug, Clone)]
pub struct LstmLayer {
    /// `4H x input` input-to-gate weights.
    pub w_ih: Tensor,
    /// `4H x H` hidden-to-gate weights.
    pub w_hh: Tensor,
    /// `4H` gate bias; the forget block starts at 1.0 so early training can
    /// retain state.
    pub bias: Tensor,
}

#[derive(Debug)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gate_i: Vec<f64>,
    gate_f: Vec<f64>,
    gate_g: Vec<f64>,
    gate_o: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Per-timestep intermediates for one layer.
#[derive(Debug)]
pub struct LstmLayerCache {
    steps: Vec<StepCache>,
    input: usize,
    hidden: usize,
}

#[derive(Debug)]
pub struct LstmGrads {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
}

impl LstmLayer {
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::Config(format!(
                "lstm layer needs positive dims, got input {input}, hidden {hidden}"
            )));
        }
        let mut w_ih = Tensor::zeros(&[4 * hidden, input])?;
        super::init_uniform(w_ih.data_mut(), input, rng);
        let mut w_hh = Tensor::zeros(&[4 * hidden, hidden])?;
        super::init_uniform(w_hh.data_mut(), hidden, rng);
        let mut bias = Tensor::zeros(&[4 * hidden])?;
        for b in &mut bias.data_mut()[hidden..2 * hidden] {
            *b = 1.0;
        }
        Ok(LstmLayer { w_ih, w_hh, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.shape()[1]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hh.shape()[1]
    }

    /// Runs the recurrence over `xs` from zero state; returns every hidden
    /// state h_1..h_T.
    pub fn forward_seq(&self, xs: &[Tensor]) -> Result<(Vec<Tensor>, LstmLayerCache)> {
        let (n_in, hidden) = (self.input_dim(), self.hidden_dim());
        if xs.is_empty() {
            return Err(Error::Contract("lstm forward needs at least one timestep".into()));
        }
        for x in xs {
            if x.rank() != 1 || x.shape()[0] != n_in {
                return Err(Error::ShapeMismatch {
                    op: "lstm_forward",
                    left: x.shape().to_vec(),
                    right: vec![n_in],
                });
            }
        }
        let mut h = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        let mut outputs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        let bias = self.bias.data();
        for x in xs {
            let xv = x.data();
            let mut gate_i = vec![0.0; hidden];
            let mut gate_f = vec![0.0; hidden];
            let mut gate_g = vec![0.0; hidden];
            let mut gate_o = vec![0.0; hidden];
            for k in 0..hidden {
                let pre = |block: usize| -> f64 {
                    let r = block * hidden + k;
                    bias[r] + dot(self.w_ih.row(r), xv) + dot(self.w_hh.row(r), &h)
                };
                gate_i[k] = sigmoid(pre(0));
                gate_f[k] = sigmoid(pre(1));
                gate_g[k] = pre(2).tanh();
                gate_o[k] = sigmoid(pre(3));
            }
            let c_prev = c.clone();
            let h_prev = h.clone();
            let mut tanh_c = vec![0.0; hidden];
            for k in 0..hidden {
                c[k] = gate_f[k] * c_prev[k] + gate_i[k] * gate_g[k];
                tanh_c[k] = c[k].tanh();
                h[k] = gate_o[k] * tanh_c[k];
            }
            outputs.push(Tensor::new(&[hidden], h.clone())?);
            steps.push(StepCache {
                x: xv.to_vec(),
                h_prev,
                c_prev,
                gate_i,
                gate_f,
                gate_g,
                gate_o,
                tanh_c,
            });
        }
        Ok((
            outputs,
            LstmLayerCache {
                steps,
                input: n_in,
                hidden,
            },
        ))
    }

    /// Backpropagation through time. `grad_h[t]` is the upstream gradient
    /// flowing into h_{t+1}; one entry per timestep is mandatory.
    pub fn backward_seq(
        &self,
        cache: &LstmLayerCache,
        grad_h: &[Tensor],
    ) -> Result<(Vec<Tensor>, LstmGrads)> {
        let (n_in, hidden) = (self.input_dim(), self.hidden_dim());
        if cache.input != n_in || cache.hidden != hidden {
            return Err(Error::Contract("lstm cache does not match this layer".into()));
        }
        if grad_h.len() != cache.steps.len() {
            return Err(Error::Contract(format!(
                "lstm backward needs a gradient for every hidden state: got {} of {}",
                grad_h.len(),
                cache.steps.len()
            )));
        }
        for g in grad_h {
            if g.rank() != 1 || g.shape()[0] != hidden {
                return Err(Error::ShapeMismatch {
                    op: "lstm_backward",
                    left: g.shape().to_vec(),
                    right: vec![hidden],
                });
            }
        }

        let steps = cache.steps.len();
        let mut grad_w_ih = vec![0.0; 4 * hidden * n_in];
        let mut grad_w_hh = vec![0.0; 4 * hidden * hidden];
        let mut grad_bias = vec![0.0; 4 * hidden];

        // Reverse-time pass: gate deltas and the dh/dc recurrences. The
        // per-timestep deltas are kept so all weight gradients can be
        // accumulated afterwards with row-major locality.
        let mut all_d_gates = vec![0.0; steps * 4 * hidden];
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        for (t, step) in cache.steps.iter().enumerate().rev() {
            let up = grad_h[t].data();
            let d_gates = &mut all_d_gates[t * 4 * hidden..(t + 1) * 4 * hidden];
            for k in 0..hidden {
                let dh = up[k] + dh_next[k];
                let dc = dh * step.gate_o[k] * (1.0 - step.tanh_c[k] * step.tanh_c[k]) + dc_next[k];
                let i = step.gate_i[k];
                let f = step.gate_f[k];
                let g = step.gate_g[k];
                let o = step.gate_o[k];
                d_gates[k] = dc * g * i * (1.0 - i);
                d_gates[hidden + k] = dc * step.c_prev[k] * f * (1.0 - f);
                d_gates[2 * hidden + k] = dc * i * (1.0 - g * g);
                d_gates[3 * hidden + k] = dh * step.tanh_c[k] * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..4 * hidden {
                let dg = d_gates[r];
                if dg != 0.0 {
                    axpy(dg, self.w_hh.row(r), &mut dh_next);
                }
            }
        }

        // Accumulation pass, one weight row at a time across all timesteps.
        let mut grad_x_flat = vec![0.0; steps * n_in];
        for r in 0..4 * hidden {
            let w_ih_row = self.w_ih.row(r);
            let grad_ih_row = &mut grad_w_ih[r * n_in..(r + 1) * n_in];
            let grad_hh_row = &mut grad_w_hh[r * hidden..(r + 1) * hidden];
            for (t, step) in cache.steps.iter().enumerate() {
                let dg = all_d_gates[t * 4 * hidden + r];
                grad_bias[r] += dg;
                if dg == 0.0 {
                    continue;
                }
                axpy(dg, &step.x, grad_ih_row);
                axpy(dg, &step.h_prev, grad_hh_row);
                axpy(dg, w_ih_row, &mut grad_x_flat[t * n_in..(t + 1) * n_in]);
            }
        }
        let mut grad_xs = Vec::with_capacity(steps);
        for t in 0..steps {
            grad_xs.push(Tensor::new(&[n_in], grad_x_flat[t * n_in..(t + 1) * n_in].to_vec())?);
        }

        Ok((
            grad_xs,
            LstmGrads {
                w_ih: Tensor::new(&[4 * hidden, n_in], grad_w_ih)?,
                w_hh: Tensor::new(&[4 * hidden, hidden], grad_w_hh)?,
                bias: Tensor::new(&[4 * hidden], grad_bias)?,
            },
        ))
    }
}

/// Runs a stack of LSTM layers; layer `l+1` consumes layer `l`'s hidden
/// sequence. Returns the top layer's hidden states and all layer caches.
pub fn lstm_forward(stack: &[LstmLayer], xs: &[Tensor]) -> Result<(Vec<Tensor>, Vec<LstmLayerCache>)> {
    if stack.is_empty() {
        return Err(Error::Config("lstm stack must not be empty".into()));
    }
    let mut caches = Vec::with_capacity(stack.len());
    let mut seq: Vec<Tensor> = xs.to_vec();
    for layer in stack {
        let (out, cache) = layer.forward_seq(&seq)?;
        caches.push(cache);
        seq = out;
    }
    Ok((seq, caches))
}

/// Adjoint of [`lstm_forward`]; `grads` holds one gradient per top-layer
/// hidden state.
pub fn lstm_backward(
    stack: &[LstmLayer],
    caches: &[LstmLayerCache],
    grads: &[Tensor],
) -> Result<(Vec<Tensor>, Vec<LstmGrads>)> {
    if stack.len() != caches.len() {
        return Err(Error::Contract("lstm stack/cache length mismatch".into()));
    }
    let mut layer_grads = Vec::with_capacity(stack.len());
    let mut upstream: Vec<Tensor> = grads.to_vec();
    for (layer, cache) in stack.iter().zip(caches).rev() {
        let (grad_xs, grads_l) = layer.backward_seq(cache, &upstream)?;
        layer_grads.push(grads_l);
        upstream = grad_xs;
    }
    layer_grads.reverse();
    Ok((upstream, layer_grads))
}
