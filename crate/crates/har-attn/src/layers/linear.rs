//! Affine map `y = W x + b` over 1-D tensors.

use crate::error::{Error, Result};
use crate::ndcore::{axpy, dot, Rng, Tensor};

#[derive(Debug, Clone)]
pub struct LinearLayer {
    /// `out x in` weight matrix.
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug)]
pub struct LinearCache {
    input: Tensor,
}

#[derive(Debug)]
pub struct LinearGrads {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LinearLayer {
    pub fn init(input: usize, output: usize, rng: &mut Rng) -> Result<Self> {
        if input == 0 || output == 0 {
            return Err(Error::Config(format!(
                "linear layer needs positive dims, got {input} -> {output}"
            )));
        }
        let mut weight = Tensor::zeros(&[output, input])?;
        super::init_uniform(weight.data_mut(), input, rng);
        Ok(LinearLayer {
            weight,
            bias: Tensor::zeros(&[output])?,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LinearCache)> {
        if x.rank() != 1 || x.shape()[0] != self.in_dim() {
            return Err(Error::ShapeMismatch {
                op: "linear_forward",
                left: x.shape().to_vec(),
                right: self.weight.shape().to_vec(),
            });
        }
        let mut out = self.bias.data().to_vec();
        for (r, o) in out.iter_mut().enumerate() {
            *o += dot(self.weight.row(r), x.data());
        }
        Ok((
            Tensor::new(&[self.out_dim()], out)?,
            LinearCache { input: x.clone() },
        ))
    }

    pub fn backward(&self, cache: &LinearCache, grad_out: &Tensor) -> Result<(Tensor, LinearGrads)> {
        if cache.input.shape()[0] != self.in_dim() {
            return Err(Error::Contract(
                "linear cache does not match this layer".into(),
            ));
        }
        if grad_out.rank() != 1 || grad_out.shape()[0] != self.out_dim() {
            return Err(Error::ShapeMismatch {
                op: "linear_backward",
                left: grad_out.shape().to_vec(),
                right: vec![self.out_dim()],
            });
        }
        let (n_in, n_out) = (self.in_dim(), self.out_dim());
        let g = grad_out.data();
        let mut grad_w = vec![0.0; n_out * n_in];
        let mut grad_x = vec![0.0; n_in];
        for r in 0..n_out {
            axpy(g[r], cache.input.data(), &mut grad_w[r * n_in..(r + 1) * n_in]);
            axpy(g[r], self.weight.row(r), &mut grad_x);
        }
        Ok((
            Tensor::new(&[n_in], grad_x)?,
            LinearGrads {
                weight: Tensor::new(&[n_out, n_in], grad_w)?,
                bias: grad_out.clone(),
            },
        ))
    }
}
