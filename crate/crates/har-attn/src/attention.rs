//! Temporal attention over the recurrent hidden states.
//!
//! Given the hidden sequence h_1..h_T, the first T-1 states form the
//! historical context. Each is transformed (`tanh(W1 h + b1)`), scored down
//! to a scalar (`w2 . u + b2`, optionally through an intermediate linear
//! stage), and the scores are softmax-normalized into weights. The final
//! embedding is the weighted sum of the ORIGINAL hidden states plus h_T — a
//! skip connection that lets gradients bypass the attention path entirely.

use crate::error::{Error, Result};
use crate::layers::init_uniform;
use crate::ndcore::{axpy, dot, softmax_slice, Rng, Tensor};

/// Parameters of the attention head over hidden states of width `hidden`.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    /// `hidden x hidden` context transform.
    pub w1: Tensor,
    pub b1: Tensor,
    /// Optional intermediate score projection (`mid x hidden` plus bias);
    /// off by default, giving the direct hidden -> 1 score path.
    pub mid: Option<(Tensor, Tensor)>,
    /// `1 x m` score row, where `m` is `hidden` or the intermediate width.
    pub w2: Tensor,
    pub b2: Tensor,
}

/// Intermediates of one attention forward pass.
#[derive(Debug)]
pub struct AttendCache {
    history: Vec<Tensor>,
    transformed: Vec<Vec<f64>>,
    mid_out: Option<Vec<Vec<f64>>>,
    weights: Vec<f64>,
    hidden: usize,
}

#[derive(Debug)]
pub struct AttentionGrads {
    pub w1: Tensor,
    pub b1: Tensor,
    pub mid: Option<(Tensor, Tensor)>,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl AttentionParams {
    pub fn init(hidden: usize, score_hidden: Option<usize>, rng: &mut Rng) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config("attention hidden width must be positive".into()));
        }
        if score_hidden == Some(0) {
            return Err(Error::Config("attention score width must be positive".into()));
        }
        let mut w1 = Tensor::zeros(&[hidden, hidden])?;
        init_uniform(w1.data_mut(), hidden, rng);
        let mid = match score_hidden {
            None => None,
            Some(m) => {
                let mut wm = Tensor::zeros(&[m, hidden])?;
                init_uniform(wm.data_mut(), hidden, rng);
                Some((wm, Tensor::zeros(&[m])?))
            }
        };
        let score_in = score_hidden.unwrap_or(hidden);
        let mut w2 = Tensor::zeros(&[1, score_in])?;
        init_uniform(w2.data_mut(), score_in, rng);
        Ok(AttentionParams {
            w1,
            b1: Tensor::zeros(&[hidden])?,
            mid,
            w2,
            b2: Tensor::zeros(&[1])?,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.shape()[0]
    }
}

/// Scores the first T-1 hidden states, softmaxes into weights, and returns
/// the weighted history sum plus the last state, with the per-frame weights.
pub fn attend_forward(
    params: &AttentionParams,
    hidden_states: &[Tensor],
) -> Result<(Tensor, Vec<f64>, AttendCache)> {
    let hidden = params.hidden_dim();
    if hidden_states.len() < 2 {
        return Err(Error::Contract(format!(
            "attention needs at least 2 hidden states, got {}",
            hidden_states.len()
        )));
    }
    for h in hidden_states {
        if h.rank() != 1 || h.shape()[0] != hidden {
            return Err(Error::ShapeMismatch {
                op: "attend_forward",
                left: h.shape().to_vec(),
                right: vec![hidden],
            });
        }
    }
    let history = &hidden_states[..hidden_states.len() - 1];
    let current = hidden_states.last().expect("non-empty");

    let mut transformed = Vec::with_capacity(history.len());
    let mut mid_out: Option<Vec<Vec<f64>>> = params.mid.as_ref().map(|_| Vec::new());
    let mut scores = Vec::with_capacity(history.len());
    for h in history {
        let mut u = vec![0.0; hidden];
        for (k, uk) in u.iter_mut().enumerate() {
            *uk = (params.b1.data()[k] + dot(params.w1.row(k), h.data())).tanh();
        }
        let score_input: Vec<f64> = match &params.mid {
            None => u.clone(),
            Some((wm, bm)) => {
                let m = wm.shape()[0];
                let mut v = vec![0.0; m];
                for (k, vk) in v.iter_mut().enumerate() {
                    *vk = bm.data()[k] + dot(wm.row(k), &u);
                }
                mid_out.as_mut().expect("mid enabled").push(v.clone());
                v
            }
        };
        scores.push(params.b2.data()[0] + dot(params.w2.row(0), &score_input));
        transformed.push(u);
    }
    let weights = softmax_slice(&scores)?;

    let mut final_embedding = current.data().to_vec();
    for (w, h) in weights.iter().zip(history) {
        axpy(*w, h.data(), &mut final_embedding);
    }

    let cache = AttendCache {
        history: history.to_vec(),
        transformed,
        mid_out,
        weights: weights.clone(),
        hidden,
    };
    Ok((Tensor::new(&[hidden], final_embedding)?, weights, cache))
}

/// Exact adjoint of [`attend_forward`]. Returns gradients for every hidden
/// state (history entries plus the final state) and for the parameters.
///
/// The final state receives `grad_final` unchanged: it enters only through
/// the additive skip path.
pub fn attend_backward(
    params: &AttentionParams,
    cache: &AttendCache,
    grad_final: &Tensor,
) -> Result<(Vec<Tensor>, AttentionGrads)> {
    let hidden = params.hidden_dim();
    if cache.hidden != hidden || cache.history.len() != cache.weights.len() {
        return Err(Error::Contract("attention cache does not match parameters".into()));
    }
    if grad_final.rank() != 1 || grad_final.shape()[0] != hidden {
        return Err(Error::ShapeMismatch {
            op: "attend_backward",
            left: grad_final.shape().to_vec(),
            right: vec![hidden],
        });
    }
    let g = grad_final.data();
    let steps = cache.history.len();

    // Weighted-sum path: d final / d h_i picks up w_i; d final / d w_i is h_i . g.
    let mut grad_h: Vec<Vec<f64>> = cache
        .weights
        .iter()
        .map(|&w| g.iter().map(|&gv| w * gv).collect())
        .collect();
    let grad_w: Vec<f64> = cache.history.iter().map(|h| dot(h.data(), g)).collect();

    // Softmax Jacobian: ds_i = w_i * (dw_i - sum_j w_j dw_j).
    let inner: f64 = cache.weights.iter().zip(&grad_w).map(|(w, gw)| w * gw).sum();
    let grad_scores: Vec<f64> = cache
        .weights
        .iter()
        .zip(&grad_w)
        .map(|(w, gw)| w * (gw - inner))
        .collect();

    let mut grad_w1 = vec![0.0; hidden * hidden];
    let mut grad_b1 = vec![0.0; hidden];
    let mut grad_mid = params.mid.as_ref().map(|(wm, bm)| {
        (vec![0.0; wm.numel()], vec![0.0; bm.numel()])
    });
    let mut grad_w2 = vec![0.0; params.w2.numel()];
    let mut grad_b2 = 0.0;

    for (i, ds) in grad_scores.iter().enumerate() {
        grad_b2 += ds;
        let u = &cache.transformed[i];
        // Gradient arriving at the tanh output u_i.
        let grad_u: Vec<f64> = match &params.mid {
            None => {
                axpy(*ds, u, &mut grad_w2);
                params.w2.row(0).iter().map(|&w| w * ds).collect()
            }
            Some((wm, _)) => {
                let v = &cache.mid_out.as_ref().expect("mid enabled")[i];
                axpy(*ds, v, &mut grad_w2);
                let grad_v: Vec<f64> = params.w2.row(0).iter().map(|&w| w * ds).collect();
                let (gwm, gbm) = grad_mid.as_mut().expect("mid enabled");
                let m = wm.shape()[0];
                let mut gu = vec![0.0; hidden];
                for k in 0..m {
                    gbm[k] += grad_v[k];
                    axpy(grad_v[k], u, &mut gwm[k * hidden..(k + 1) * hidden]);
                    axpy(grad_v[k], wm.row(k), &mut gu);
                }
                gu
            }
        };
        // Through tanh into the affine transform and the hidden state.
        let h = cache.history[i].data();
        for k in 0..hidden {
            let dz = grad_u[k] * (1.0 - u[k] * u[k]);
            grad_b1[k] += dz;
            axpy(dz, h, &mut grad_w1[k * hidden..(k + 1) * hidden]);
            axpy(dz, params.w1.row(k), &mut grad_h[i]);
        }
    }

    let mut grads_out: Vec<Tensor> = Vec::with_capacity(steps + 1);
    for gh in grad_h {
        grads_out.push(Tensor::new(&[hidden], gh)?);
    }
    // Skip path: identity adjoint.
    grads_out.push(grad_final.clone());

    Ok((
        grads_out,
        AttentionGrads {
            w1: Tensor::new(&[hidden, hidden], grad_w1)?,
            b1: Tensor::new(&[hidden], grad_b1)?,
            mid: match (&params.mid, grad_mid) {
                (Some((wm, bm)), Some((gwm, gbm))) => Some((
                    Tensor::new(wm.shape(), gwm)?,
                    Tensor::new(bm.shape(), gbm)?,
                )),
                _ => None,
            },
            w2: Tensor::new(params.w2.shape(), grad_w2)?,
            b2: Tensor::vector(&[grad_b2])?,
        },
    ))
}
