//! Inverted dropout: kept units are scaled by 1/(1-p) at train time so the
//! eval pass is the identity map with no rescaling.

use crate::error::{Error, Result};
use crate::ndcore::Rng;

use super::Mode;

#[derive(Debug, Clone, Copy)]
pub struct Dropout {
    p: f64,
}

/// Mask produced by a train-mode forward; `None` means the pass was the
/// identity (eval mode) and backward should pass gradients through unchanged.
pub type DropoutMask = Option<Vec<f64>>;

impl Dropout {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout p must be in [0,1), got {p}")));
        }
        Ok(Dropout { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Applies dropout in place and returns the mask for backward.
    pub fn forward(&self, values: &mut [f64], mode: Mode, rng: &mut Rng) -> DropoutMask {
        match mode {
            Mode::Eval => None,
            Mode::Train => {
                let keep_scale = 1.0 / (1.0 - self.p);
                let mask: Vec<f64> = values
                    .iter_mut()
                    .map(|v| {
                        let m = if rng.next_f64() < self.p { 0.0 } else { keep_scale };
                        *v *= m;
                        m
                    })
                    .collect();
                Some(mask)
            }
        }
    }

    /// Adjoint of `forward` for the given mask.
    pub fn backward(mask: &DropoutMask, grads: &mut [f64]) {
        if let Some(mask) = mask {
            debug_assert_eq!(mask.len(), grads.len());
            for (g, m) in grads.iter_mut().zip(mask) {
                *g *= m;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_mode_is_identity() {
        let d = Dropout::new(0.9).unwrap();
        let mut rng = Rng::new(1);
        let mut v = vec![1.0, -2.0, 3.0];
        let mask = d.forward(&mut v, Mode::Eval, &mut rng);
        assert!(mask.is_none());
        assert_eq!(v, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn p_zero_train_mode_is_identity() {
        let d = Dropout::new(0.0).unwrap();
        let mut rng = Rng::new(1);
        let mut v = vec![1.0, -2.0, 3.0];
        let mask = d.forward(&mut v, Mode::Train, &mut rng).unwrap();
        assert_eq!(v, vec![1.0, -2.0, 3.0]);
        assert!(mask.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn p_of_one_is_a_configuration_error() {
        assert!(matches!(Dropout::new(1.0), Err(Error::Config(_))));
        assert!(matches!(Dropout::new(1.5), Err(Error::Config(_))));
        assert!(matches!(Dropout::new(-0.1), Err(Error::Config(_))));
    }

    #[test]
    fn train_mode_mean_preserves_expectation() {
        // Mean over 10^4 masks approximates the input within 2% for p = 0.5.
        let d = Dropout::new(0.5).unwrap();
        let mut rng = Rng::new(4242);
        let x = 3.0;
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let mut v = [x];
            d.forward(&mut v, Mode::Train, &mut rng);
            sum += v[0];
        }
        let mean = sum / n as f64;
        assert!(
            (mean - x).abs() / x < 0.02,
            "dropout expectation drifted: {mean} vs {x}"
        );
    }

    #[test]
    fn backward_applies_the_same_mask() {
        let d = Dropout::new(0.5).unwrap();
        let mut rng = Rng::new(7);
        let mut v = vec![1.0; 16];
        let mask = d.forward(&mut v, Mode::Train, &mut rng);
        let mut g = vec![1.0; 16];
        Dropout::backward(&mask, &mut g);
        assert_eq!(v, g);
    }
}
