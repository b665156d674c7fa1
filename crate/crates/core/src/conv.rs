//! 2-D convolution (cross-correlation) forward and backward passes.
//!
//! The implementation lowers each batch item to an im2col matrix and runs the
//! blocked GEMM kernels; 1×1 kernels skip the lowering entirely. The naive
//! loop oracle in [`crate::reference`] stays the ground truth for this path.

use crate::error::{Error, Result};
use crate::gemm::{gemm_a_bt, gemm_at_b, gemm_nn};
use crate::scalar::Scalar;
use crate::scratch;
use crate::tensor::{Shape, Tensor};

/// Boundary handling: `Same` zero-pads so output dims equal input dims,
/// `Valid` computes only fully covered positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Same,
    Valid,
}

/// Convolution weights shaped (out_c, in_c, kh, kw) plus one bias per output
/// channel. Kernel sides are limited to 1–3, the shapes this network uses.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel<T> {
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvKernel<T> {
    pub fn new(weights: Tensor<T>, bias: Vec<T>) -> Result<Self> {
        let s = weights.shape();
        if !(1..=3).contains(&s.h) || !(1..=3).contains(&s.w) {
            return Err(Error::Shape(format!(
                "kernel sides must be in 1..=3, got {}x{}",
                s.h, s.w
            )));
        }
        if bias.len() != s.n {
            return Err(Error::Shape(format!(
                "bias length {} does not match {} output channels",
                bias.len(),
                s.n
            )));
        }
        Ok(ConvKernel { weights, bias })
    }

    pub fn zeros(out_c: usize, in_c: usize, kh: usize, kw: usize) -> Result<Self> {
        Self::new(
            Tensor::zeros(Shape::new(out_c, in_c, kh, kw))?,
            vec![T::zero(); out_c],
        )
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape().n
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape().c
    }

    pub fn cast<U: Scalar>(&self) -> ConvKernel<U> {
        ConvKernel {
            weights: self.weights.cast(),
            bias: self.bias.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

fn padding_amounts(kh: usize, kw: usize, padding: Padding) -> Result<(usize, usize)> {
    match padding {
        Padding::Valid => Ok((0, 0)),
        Padding::Same => {
            if kh % 2 == 0 || kw % 2 == 0 {
                Err(Error::Shape(format!(
                    "same padding requires odd kernel sides, got {kh}x{kw}"
                )))
            } else {
                Ok(((kh - 1) / 2, (kw - 1) / 2))
            }
        }
    }
}

fn check_forward<T: Scalar>(
    input: &Tensor<T>,
    k: &ConvKernel<T>,
    padding: Padding,
) -> Result<(usize, usize, usize, usize)> {
    let is = input.shape();
    let ks = k.weights.shape();
    if is.c != ks.c {
        return Err(Error::Shape(format!(
            "input has {} channels but kernel expects {}",
            is.c, ks.c
        )));
    }
    let (ph, pw) = padding_amounts(ks.h, ks.w, padding)?;
    let oh = (is.h + 2 * ph).checked_sub(ks.h - 1).filter(|&v| v > 0);
    let ow = (is.w + 2 * pw).checked_sub(ks.w - 1).filter(|&v| v > 0);
    match (oh, ow) {
        (Some(oh), Some(ow)) => Ok((ph, pw, oh, ow)),
        _ => Err(Error::Shape(format!(
            "input {}x{} too small for {}x{} valid convolution",
            is.h, is.w, ks.h, ks.w
        ))),
    }
}

/// Unfold one batch item (c·h·w contiguous) into a (c·kh·kw) × (oh·ow)
/// column matrix, zero-filling out-of-range taps.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(
    item: &[T],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
    cols: &mut [T],
) {
    for ci in 0..c {
        let plane = &item[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((ci * kh + ky) * kw + kx) * (oh * ow);
                let lo = pw.saturating_sub(kx);
                let hi = (w + pw).saturating_sub(kx).min(ow).max(lo);
                for oy in 0..oh {
                    let dst = &mut cols[row + oy * ow..row + (oy + 1) * ow];
                    let iy = (oy + ky) as isize - ph as isize;
                    if iy < 0 || iy as usize >= h {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src_off = iy as usize * w + lo + kx - pw;
                    dst[..lo].fill(T::zero());
                    dst[lo..hi].copy_from_slice(&plane[src_off..src_off + (hi - lo)]);
                    dst[hi..].fill(T::zero());
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back onto the input grid.
#[allow(clippy::too_many_arguments)]
fn col2im_add<T: Scalar>(
    cols: &[T],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
    item: &mut [T],
) {
    for ci in 0..c {
        let plane = &mut item[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((ci * kh + ky) * kw + kx) * (oh * ow);
                let lo = pw.saturating_sub(kx);
                let hi = (w + pw).saturating_sub(kx).min(ow).max(lo);
                for oy in 0..oh {
                    let iy = (oy + ky) as isize - ph as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    let src = &cols[row + oy * ow + lo..row + oy * ow + hi];
                    let dst_off = iy as usize * w + lo + kx - pw;
                    for (dv, &sv) in plane[dst_off..dst_off + (hi - lo)].iter_mut().zip(src) {
                        *dv += sv;
                    }
                }
            }
        }
    }
}

/// Cross-correlation (no kernel flip), stride 1.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    k: &ConvKernel<T>,
    padding: Padding,
) -> Result<Tensor<T>> {
    let (ph, pw, oh, ow) = check_forward(input, k, padding)?;
    let is = input.shape();
    let ks = k.weights.shape();
    let (oc, kk) = (ks.n, ks.c * ks.h * ks.w);
    let ohow = oh * ow;
    let mut out = Tensor::zeros(Shape::new(is.n, oc, oh, ow))?;

    let one_by_one = ks.h == 1 && ks.w == 1;
    let mut cols = if one_by_one {
        Vec::new()
    } else {
        scratch::take::<T>(kk * ohow)
    };
    for n in 0..is.n {
        let out_item = out.item_mut(n);
        for o in 0..oc {
            out_item[o * ohow..(o + 1) * ohow].fill(k.bias[o]);
        }
        if one_by_one {
            gemm_nn(oc, kk, ohow, k.weights.data(), input.item(n), out_item);
        } else {
            im2col(
                input.item(n),
                is.c,
                is.h,
                is.w,
                ks.h,
                ks.w,
                ph,
                pw,
                oh,
                ow,
                &mut cols,
            );
            gemm_nn(oc, kk, ohow, k.weights.data(), &cols, out_item);
        }
    }
    scratch::give(cols);
    Ok(out)
}

/// Gradients of a scalar loss with respect to the convolution input, weights
/// and bias, given the loss gradient at the output.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    k: &ConvKernel<T>,
    grad_out: &Tensor<T>,
    padding: Padding,
) -> Result<(Tensor<T>, ConvKernel<T>)> {
    let (ph, pw, oh, ow) = check_forward(input, k, padding)?;
    let is = input.shape();
    let ks = k.weights.shape();
    let gs = grad_out.shape();
    let expected = Shape::new(is.n, ks.n, oh, ow);
    if gs != expected {
        return Err(Error::Shape(format!(
            "grad_out shape {gs} does not match forward output {expected}"
        )));
    }
    let (oc, kk) = (ks.n, ks.c * ks.h * ks.w);
    let ohow = oh * ow;

    let mut grad_input = Tensor::zeros(is)?;
    let mut grad_w = Tensor::zeros(ks)?;
    let mut grad_b = vec![T::zero(); oc];

    let one_by_one = ks.h == 1 && ks.w == 1;
    let mut cols = if one_by_one {
        Vec::new()
    } else {
        scratch::take::<T>(kk * ohow)
    };
    let mut grad_cols = scratch::take::<T>(kk * ohow);
    for n in 0..is.n {
        let g_item = grad_out.item(n);
        for o in 0..oc {
            grad_b[o] = grad_b[o] + g_item[o * ohow..(o + 1) * ohow].iter().copied().sum();
        }
        if one_by_one {
            gemm_a_bt(oc, kk, ohow, g_item, input.item(n), grad_w.data_mut());
            gemm_at_b(oc, kk, ohow, k.weights.data(), g_item, grad_input.item_mut(n));
        } else {
            im2col(
                input.item(n),
                is.c,
                is.h,
                is.w,
                ks.h,
                ks.w,
                ph,
                pw,
                oh,
                ow,
                &mut cols,
            );
            gemm_a_bt(oc, kk, ohow, g_item, &cols, grad_w.data_mut());
            grad_cols.fill(T::zero());
            gemm_at_b(oc, kk, ohow, k.weights.data(), g_item, &mut grad_cols);
            col2im_add(
                &grad_cols,
                is.c,
                is.h,
                is.w,
                ks.h,
                ks.w,
                ph,
                pw,
                oh,
                ow,
                grad_input.item_mut(n),
            );
        }
    }
    scratch::give(cols);
    scratch::give(grad_cols);
    Ok((grad_input, ConvKernel::new(grad_w, grad_b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use rand::Rng;

    fn random_tensor(shape: Shape, rng: &mut impl Rng) -> Tensor<f32> {
        let data = (0..shape.len())
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    fn random_kernel(oc: usize, ic: usize, kh: usize, kw: usize, rng: &mut impl Rng) -> ConvKernel<f32> {
        let weights = random_tensor(Shape::new(oc, ic, kh, kw), rng);
        let bias = (0..oc).map(|_| rng.random_range(-0.5f32..0.5)).collect();
        ConvKernel::new(weights, bias).unwrap()
    }

    #[test]
    fn zero_kernel_gives_zero_output() {
        let mut rng = crate::seeds::rng(1);
        let input = random_tensor(Shape::new(1, 2, 5, 5), &mut rng);
        let k = ConvKernel::<f32>::zeros(3, 2, 3, 3).unwrap();
        let out = conv2d_forward(&input, &k, Padding::Same).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut rng = crate::seeds::rng(2);
        let input = random_tensor(Shape::new(2, 1, 6, 7), &mut rng);
        let mut k = ConvKernel::<f32>::zeros(1, 1, 3, 3).unwrap();
        *k.weights.at_mut(0, 0, 1, 1) = 1.0;
        let out = conv2d_forward(&input, &k, Padding::Same).unwrap();
        assert_eq!(out.shape(), input.shape());
        for (a, b) in out.data().iter().zip(input.data()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn matches_naive_oracle() {
        let mut rng = crate::seeds::rng(3);
        for &(n, c, oc, h, w, kh, pad) in &[
            (1, 2, 3, 5, 5, 3, Padding::Same),
            (2, 3, 4, 8, 6, 3, Padding::Same),
            (1, 1, 1, 1, 1, 3, Padding::Same),
            (1, 2, 2, 5, 5, 3, Padding::Valid),
            (2, 3, 5, 4, 4, 1, Padding::Same),
        ] {
            let input = random_tensor(Shape::new(n, c, h, w), &mut rng);
            let k = random_kernel(oc, c, kh, kh, &mut rng);
            let fast = conv2d_forward(&input, &k, pad).unwrap();
            let naive = reference::conv2d(&input, &k, pad);
            assert_eq!(fast.shape(), naive.shape());
            for (a, b) in fast.data().iter().zip(naive.data()) {
                assert!(
                    (a - b).abs() <= 1e-5 * b.abs().max(1.0),
                    "conv mismatch {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let input = Tensor::<f32>::zeros(Shape::new(1, 2, 4, 4)).unwrap();
        let k = ConvKernel::<f32>::zeros(1, 3, 3, 3).unwrap();
        assert!(matches!(
            conv2d_forward(&input, &k, Padding::Same),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn scalar_chain_rule_1x1() {
        // Single-pixel input, 1×1 kernel: grad_weight = x·g, grad_input = w·g.
        let input = Tensor::from_vec(Shape::new(1, 1, 1, 1), vec![3.0f32]).unwrap();
        let mut k = ConvKernel::<f32>::zeros(1, 1, 1, 1).unwrap();
        *k.weights.at_mut(0, 0, 0, 0) = 2.0;
        let grad_out = Tensor::from_vec(Shape::new(1, 1, 1, 1), vec![5.0f32]).unwrap();
        let (gi, gk) = conv2d_backward(&input, &k, &grad_out, Padding::Same).unwrap();
        assert_eq!(gi.at(0, 0, 0, 0), 2.0 * 5.0);
        assert_eq!(gk.weights.at(0, 0, 0, 0), 3.0 * 5.0);
        assert_eq!(gk.bias[0], 5.0);
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let mut rng = crate::seeds::rng(4);
        let input = random_tensor(Shape::new(1, 2, 4, 4), &mut rng);
        let k = random_kernel(3, 2, 3, 3, &mut rng);
        let grad_out = Tensor::<f32>::zeros(Shape::new(1, 3, 4, 4)).unwrap();
        let (gi, gk) = conv2d_backward(&input, &k, &grad_out, Padding::Same).unwrap();
        assert!(gi.data().iter().all(|&v| v == 0.0));
        assert!(gk.weights.data().iter().all(|&v| v == 0.0));
        assert!(gk.bias.iter().all(|&v| v == 0.0));
    }
}
