//! Inverted dropout with an explicit seed.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeds;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Train mode zeroes each element with probability `rate` and scales the
/// survivors by 1/(1−rate), so the expectation equals the input and inference
/// needs no rescaling. Infer mode is the identity; the returned mask is
/// `None` and the output aliases the input bit-for-bit.
pub fn dropout_apply<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    mode: DropoutMode,
    seed: u64,
) -> Result<(Tensor<T>, Option<Tensor<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if mode == DropoutMode::Infer || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep_scale = T::from_f64(1.0 / (1.0 - rate));
    let mut rng = seeds::rng(seed);
    let mut mask = x.clone();
    for v in mask.data_mut() {
        *v = if rng.random::<f64>() < rate {
            T::zero()
        } else {
            keep_scale
        };
    }
    let out = x.hadamard(&mask)?;
    Ok((out, Some(mask)))
}

/// Backward pass: the mask already encodes both the zeroing and the
/// 1/(1−rate) scaling.
pub fn dropout_backward<T: Scalar>(grad: &Tensor<T>, mask: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    match mask {
        Some(m) => grad.hadamard(m),
        None => Ok(grad.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn rate_zero_is_identity() {
        let x = Tensor::from_vec(Shape::new(1, 1, 2, 2), vec![1.0f32, -2.0, 3.0, 0.5]).unwrap();
        let (y, mask) = dropout_apply(&x, 0.0, DropoutMode::Train, 1).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
    }

    #[test]
    fn infer_mode_is_identity_for_any_rate() {
        let x = Tensor::from_vec(Shape::new(1, 1, 1, 3), vec![0.25f32, 0.5, 0.75]).unwrap();
        let (y, mask) = dropout_apply(&x, 0.7, DropoutMode::Infer, 9).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
    }

    #[test]
    fn rate_one_rejected() {
        let x = Tensor::<f32>::zeros(Shape::new(1, 1, 1, 1)).unwrap();
        assert!(dropout_apply(&x, 1.0, DropoutMode::Train, 0).is_err());
    }

    #[test]
    fn sample_mean_close_to_one() {
        // Law of large numbers: inverted dropout preserves the expectation.
        let n = 100_000;
        let x = Tensor::filled(Shape::new(1, 1, 1, n), 1.0f32).unwrap();
        let (y, mask) = dropout_apply(&x, 0.5, DropoutMode::Train, 123).unwrap();
        assert!(mask.is_some());
        let mean = y.sum_f64() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn same_seed_same_mask() {
        let x = Tensor::filled(Shape::new(1, 2, 8, 8), 1.0f32).unwrap();
        let (a, _) = dropout_apply(&x, 0.3, DropoutMode::Train, 7).unwrap();
        let (b, _) = dropout_apply(&x, 0.3, DropoutMode::Train, 7).unwrap();
        assert_eq!(a, b);
    }
}
