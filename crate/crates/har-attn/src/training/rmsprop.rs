//! RMSProp parameter updates (plain variant, no momentum or centering):
//!
//! ```text
//! v <- alpha * v + (1 - alpha) * g^2
//! theta <- theta - lr * g / (sqrt(v) + epsilon)
//! ```

use crate::error::{Error, Result};
use crate::model::{ModelGrads, ModelParams};
use crate::ndcore::Tensor;

#[derive(Debug, Clone)]
pub struct RmsProp {
    /// Squared-gradient accumulator decay.
    pub alpha: f64,
    pub epsilon: f64,
    /// Accumulators aligned with the parameter enumeration order.
    v: Vec<(String, Tensor)>,
}

impl RmsProp {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Self::with_config(params, 0.9, 1e-8)
    }

    pub fn with_config(params: &ModelParams, alpha: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Config(format!("rmsprop alpha must be in [0,1), got {alpha}")));
        }
        if epsilon <= 0.0 {
            return Err(Error::Config(format!("rmsprop epsilon must be positive, got {epsilon}")));
        }
        let v = params
            .named_tensors()
            .into_iter()
            .map(|(name, t)| Ok((name, Tensor::zeros(t.shape())?)))
            .collect::<Result<_>>()?;
        Ok(RmsProp { alpha, epsilon, v })
    }

    /// Accumulator for a parameter group, mainly for inspection in tests.
    pub fn accumulator(&self, group: &str) -> Option<&Tensor> {
        self.v.iter().find(|(n, _)| n == group).map(|(_, t)| t)
    }

    /// One update step with learning rate `lr`. A non-finite gradient entry
    /// aborts with the offending parameter group named.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelGrads, lr: f64) -> Result<()> {
        if lr <= 0.0 {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        let mut tensors = params.named_tensors_mut();
        let grad_tensors = grads.named_tensors();
        if tensors.len() != grad_tensors.len() || tensors.len() != self.v.len() {
            return Err(Error::Contract("optimizer state does not match parameters".into()));
        }
        for (((p_name, p), (g_name, g)), (v_name, v)) in
            tensors.iter_mut().zip(grad_tensors).zip(self.v.iter_mut())
        {
            if p_name != &g_name || p_name != v_name {
                return Err(Error::Contract(format!(
                    "parameter/gradient order diverged at {p_name} vs {g_name}"
                )));
            }
            if p.shape() != g.shape() {
                return Err(Error::ShapeMismatch {
                    op: "rmsprop_step",
                    left: g.shape().to_vec(),
                    right: p.shape().to_vec(),
                });
            }
            if !g.data().iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("gradient of {p_name}"),
                });
            }
            let (alpha, eps) = (self.alpha, self.epsilon);
            for ((theta, &grad), acc) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(v.data_mut().iter_mut())
            {
                *acc = alpha * *acc + (1.0 - alpha) * grad * grad;
                *theta -= lr * grad / (acc.sqrt() + eps);
            }
        }
        Ok(())
    }
}
