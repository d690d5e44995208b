//! Dense row-major tensors of 64-bit reals, at most three axes.
//!
//! Tensors are immutable values from the caller's perspective: every public
//! operation returns a fresh tensor and verifies that all elements stayed
//! finite, so downstream code never has to re-check for NaN/Inf.

use crate::error::{Error, Result};

/// Dense n-dimensional array (n <= 3) with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a shape and row-major data.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape)?;
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::ShapeMismatch {
                op: "Tensor::new",
                left: shape.to_vec(),
                right: vec![data.len()],
            });
        }
        let t = Tensor {
            shape: shape.to_vec(),
            data,
        };
        t.check_finite("Tensor::new")?;
        Ok(t)
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        let numel: usize = shape.iter().product();
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        })
    }

    pub fn filled(shape: &[usize], value: f64) -> Result<Self> {
        let numel: usize = {
            check_shape(shape)?;
            shape.iter().product()
        };
        Tensor::new(shape, vec![value; numel])
    }

    /// 1-D tensor from a slice.
    pub fn vector(values: &[f64]) -> Result<Self> {
        Tensor::new(&[values.len()], values.to_vec())
    }

    /// Identity matrix of side `n`.
    pub fn identity(n: usize) -> Result<Self> {
        let mut t = Tensor::zeros(&[n, n])?;
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row `i` of a 2-D tensor as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert_eq!(self.rank(), 2);
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    /// Element of a 2-D tensor.
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.rank(), 2);
        self.data[i * self.shape[1] + j]
    }

    /// Element of a 3-D tensor.
    pub fn at3(&self, i: usize, j: usize, k: usize) -> f64 {
        debug_assert_eq!(self.rank(), 3);
        self.data[(i * self.shape[1] + j) * self.shape[2] + k]
    }

    /// Matrix product of two 2-D tensors with a fixed accumulation order.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        // Transposing the right operand makes every inner product contiguous.
        let mut rhs_t = vec![0.0; k * n];
        for r in 0..k {
            for c in 0..n {
                rhs_t[c * k + r] = other.data[r * n + c];
            }
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let lhs_row = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                out[i * n + j] = dot(lhs_row, &rhs_t[j * k..(j + 1) * k]);
            }
        }
        let t = Tensor {
            shape: vec![m, n],
            data: out,
        };
        t.check_finite("matmul")?;
        Ok(t)
    }

    /// Numerically stable softmax over a 1-D tensor.
    pub fn softmax(&self) -> Result<Tensor> {
        if self.rank() != 1 {
            return Err(Error::ShapeMismatch {
                op: "softmax",
                left: self.shape.clone(),
                right: vec![0],
            });
        }
        Tensor::vector(&softmax_slice(&self.data)?)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn add_scalar(&self, s: f64) -> Result<Tensor> {
        self.map("add_scalar", |a| a + s)
    }

    pub fn mul_scalar(&self, s: f64) -> Result<Tensor> {
        self.map("mul_scalar", |a| a * s)
    }

    pub fn tanh(&self) -> Result<Tensor> {
        self.map("tanh", f64::tanh)
    }

    pub fn relu(&self) -> Result<Tensor> {
        self.map("relu", |a| if a > 0.0 { a } else { 0.0 })
    }

    pub fn sigmoid(&self) -> Result<Tensor> {
        self.map("sigmoid", sigmoid)
    }

    fn map(&self, op: &'static str, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        let t = Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&a| f(a)).collect(),
        };
        t.check_finite(op)?;
        Ok(t)
    }

    fn zip_with(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "elementwise",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let t = Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        };
        t.check_finite(op)?;
        Ok(t)
    }

    fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: context.to_string(),
            })
        }
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > 3 {
        return Err(Error::Config(format!(
            "tensor rank must be 1..=3, got {}",
            shape.len()
        )));
    }
    if shape.contains(&0) {
        return Err(Error::Config(format!("tensor dims must be positive: {shape:?}")));
    }
    Ok(())
}

/// Saturating logistic function; never returns NaN for finite input.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax of a slice with max-subtraction for overflow safety.
pub fn softmax_slice(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "softmax",
            left: vec![0],
            right: vec![1],
        });
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = values.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

/// Inner product with a fixed four-way accumulation order.
///
/// The split into four independent accumulators is part of the definition, so
/// the result is identical on every platform and run.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4 * 4;
    let (a_main, a_rest) = a.split_at(chunks);
    let (b_main, b_rest) = b.split_at(chunks);
    for (pa, pb) in a_main.chunks_exact(4).zip(b_main.chunks_exact(4)) {
        acc[0] += pa[0] * pb[0];
        acc[1] += pa[1] * pb[1];
        acc[2] += pa[2] * pb[2];
        acc[3] += pa[3] * pb[3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in a_rest.iter().zip(b_rest) {
        sum += x * y;
    }
    sum
}

/// `y += alpha * x`, elementwise.
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}
