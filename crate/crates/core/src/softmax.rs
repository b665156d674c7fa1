//! Per-pixel softmax over the channel axis.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Exp-normalize each pixel's channel vector, subtracting the channel max
/// first for numerical stability. Output channels sum to 1 at every pixel.
pub fn softmax_channelwise<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let s = logits.shape();
    let hw = s.h * s.w;
    let mut out = logits.clone();
    for n in 0..s.n {
        for pix in 0..hw {
            let mut maxv = logits.plane(n, 0)[pix];
            for c in 1..s.c {
                let v = logits.plane(n, c)[pix];
                if v > maxv {
                    maxv = v;
                }
            }
            let mut denom = T::zero();
            for c in 0..s.c {
                let e = (logits.plane(n, c)[pix] - maxv).exp();
                out.plane_mut(n, c)[pix] = e;
                denom += e;
            }
            for c in 0..s.c {
                out.plane_mut(n, c)[pix] /= denom;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use proptest::prelude::*;

    fn softmax3(a: f32, b: f32, c: f32) -> [f32; 3] {
        let t = Tensor::from_vec(Shape::new(1, 3, 1, 1), vec![a, b, c]).unwrap();
        let o = softmax_channelwise(&t);
        [o.at(0, 0, 0, 0), o.at(0, 1, 0, 0), o.at(0, 2, 0, 0)]
    }

    #[test]
    fn uniform_logits_give_uniform_probs() {
        let p = softmax3(0.0, 0.0, 0.0);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn known_values() {
        let p = softmax3(1.0, 2.0, 3.0);
        // Direct evaluation of exp-normalize.
        assert!((p[0] - 0.0900).abs() < 1e-4);
        assert!((p[1] - 0.2447).abs() < 1e-4);
        assert!((p[2] - 0.6652).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn shift_invariant_and_normalized(
            a in -20.0f32..20.0, b in -20.0f32..20.0, c in -20.0f32..20.0,
            shift in -50.0f32..50.0,
        ) {
            let p = softmax3(a, b, c);
            let q = softmax3(a + shift, b + shift, c + shift);
            for (x, y) in p.iter().zip(&q) {
                prop_assert!((x - y).abs() < 1e-5);
            }
            let sum: f32 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-6);
            for v in p {
                prop_assert!(v > 0.0 && v < 1.0 + 1e-6);
            }
        }
    }
}
