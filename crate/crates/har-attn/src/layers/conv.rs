//! One-dimensional valid convolution along the time axis.
//!
//! A layer owns `f` filters of length `kernel_len` plus one bias per filter.
//! Filters never span feature maps:
//! - input `T x 1` (one map): every filter is applied to it, expanding to
//!   `f` output maps;
//! - input `T x f` (as many maps as filters): map `j` is convolved with
//!   filter `j` (depthwise), keeping `f` maps.
//!
//! Output time length is `T - kernel_len + 1`; there is no padding.

use crate::error::{Error, Result};
use crate::ndcore::{Rng, Tensor};

#[derive(Debug, Clone)]
pub struct ConvLayer {
    /// `f x kernel_len` filter bank.
    pub kernels: Tensor,
    /// One bias per filter.
    pub bias: Tensor,
}

/// Inputs retained for the backward pass.
#[derive(Debug)]
pub struct ConvCache {
    input: Tensor,
    filters: usize,
    kernel_len: usize,
}

#[derive(Debug)]
pub struct ConvGrads {
    pub kernels: Tensor,
    pub bias: Tensor,
}

impl ConvLayer {
    pub fn init(filters: usize, kernel_len: usize, rng: &mut Rng) -> Result<Self> {
        if filters == 0 || kernel_len == 0 {
            return Err(Error::Config(format!(
                "conv layer needs filters > 0 and kernel_len > 0, got {filters}, {kernel_len}"
            )));
        }
        let mut kernels = Tensor::zeros(&[filters, kernel_len])?;
        super::init_uniform(kernels.data_mut(), kernel_len, rng);
        // A small positive bias keeps ReLU units live at the start and off
        // the exact kink, where gradients are undefined.
        Ok(ConvLayer {
            kernels,
            bias: Tensor::filled(&[filters], 0.01)?,
        })
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels.shape()[1]
    }

    /// Valid convolution of `x` (`T x 1` or `T x f`).
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        let (filters, klen) = (self.filters(), self.kernel_len());
        if x.rank() != 2 || (x.shape()[1] != 1 && x.shape()[1] != filters) {
            return Err(Error::ShapeMismatch {
                op: "conv_forward",
                left: x.shape().to_vec(),
                right: self.kernels.shape().to_vec(),
            });
        }
        let t_in = x.shape()[0];
        if t_in < klen {
            return Err(Error::WindowTooShort {
                len: t_in,
                window: klen,
            });
        }
        let t_out = t_in - klen + 1;
        let maps_in = x.shape()[1];
        let xs = x.data();
        let ks = self.kernels.data();
        let bs = self.bias.data();
        let mut out = vec![0.0; t_out * filters];
        for t in 0..t_out {
            for j in 0..filters {
                let src = if maps_in == 1 { 0 } else { j };
                let mut acc = bs[j];
                for u in 0..klen {
                    acc += ks[j * klen + u] * xs[(t + u) * maps_in + src];
                }
                out[t * filters + j] = acc;
            }
        }
        let output = Tensor::new(&[t_out, filters], out)?;
        let cache = ConvCache {
            input: x.clone(),
            filters,
            kernel_len: klen,
        };
        Ok((output, cache))
    }

    /// Exact adjoint of `forward`: gradients w.r.t. the input and parameters.
    pub fn backward(&self, cache: &ConvCache, grad_out: &Tensor) -> Result<(Tensor, ConvGrads)> {
        let (filters, klen) = (self.filters(), self.kernel_len());
        if cache.filters != filters || cache.kernel_len != klen {
            return Err(Error::Contract(
                "conv cache does not match this layer".into(),
            ));
        }
        let t_in = cache.input.shape()[0];
        let maps_in = cache.input.shape()[1];
        let t_out = t_in - klen + 1;
        if grad_out.shape() != [t_out, filters] {
            return Err(Error::ShapeMismatch {
                op: "conv_backward",
                left: grad_out.shape().to_vec(),
                right: vec![t_out, filters],
            });
        }
        let xs = cache.input.data();
        let ks = self.kernels.data();
        let gs = grad_out.data();

        let mut grad_x = vec![0.0; t_in * maps_in];
        let mut grad_k = vec![0.0; filters * klen];
        let mut grad_b = vec![0.0; filters];

        for t in 0..t_out {
            for j in 0..filters {
                let g = gs[t * filters + j];
                if g == 0.0 {
                    continue;
                }
                let src = if maps_in == 1 { 0 } else { j };
                grad_b[j] += g;
                for u in 0..klen {
                    grad_k[j * klen + u] += g * xs[(t + u) * maps_in + src];
                    grad_x[(t + u) * maps_in + src] += g * ks[j * klen + u];
                }
            }
        }

        Ok((
            Tensor::new(&[t_in, maps_in], grad_x)?,
            ConvGrads {
                kernels: Tensor::new(&[filters, klen], grad_k)?,
                bias: Tensor::new(&[filters], grad_b)?,
            },
        ))
    }
}
