//! Numeric core: dense tensors and seeded randomness.

mod rng;
mod tensor;

pub use rng::{shuffle_indices, Rng};
pub use tensor::{dot, sigmoid, softmax_slice, Tensor};

pub(crate) use tensor::axpy;

#[cfg(test)]
mod proptests {
    use super::{shuffle_indices, softmax_slice, Rng as SeedRng};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn softmax_sums_to_one(values in proptest::collection::vec(-50.0f64..50.0, 1..64)) {
            let s = softmax_slice(&values).unwrap();
            let sum: f64 = s.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(s.iter().all(|&w| w > 0.0));
        }

        #[test]
        fn softmax_shift_invariance(
            values in proptest::collection::vec(-50.0f64..50.0, 1..32),
            shift in -100.0f64..100.0,
        ) {
            let a = softmax_slice(&values).unwrap();
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let b = softmax_slice(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn equal_seeds_equal_streams(seed in any::<u64>(), n in 0usize..200) {
            let a = shuffle_indices(&mut SeedRng::new(seed), n);
            let b = shuffle_indices(&mut SeedRng::new(seed), n);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn softmax_sum_over_many_random_draws() {
        // 1000 random vectors, sums within 1e-12 of one.
        let mut rng = SeedRng::new(31337);
        for _ in 0..1000 {
            let len = 1 + rng.next_below(32) as usize;
            let v: Vec<f64> = (0..len).map(|_| rng.uniform(-30.0, 30.0)).collect();
            let s = softmax_slice(&v).unwrap();
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
