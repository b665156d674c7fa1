//! Naive reference implementations used as test oracles.
//!
//! These are deliberately written as plain nested loops with no lowering or
//! blocking, independent of the optimized kernels, and stay in the build so
//! the test suites can always compare against them.

use crate::conv::{ConvKernel, Padding};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Six-nested-loop cross-correlation with zero padding, stride 1.
pub fn conv2d<T: Scalar>(input: &Tensor<T>, k: &ConvKernel<T>, padding: Padding) -> Tensor<T> {
    let is = input.shape();
    let ks = k.weights.shape();
    let (kh, kw) = (ks.h, ks.w);
    let (ph, pw) = match padding {
        Padding::Same => ((kh - 1) / 2, (kw - 1) / 2),
        Padding::Valid => (0, 0),
    };
    let oh = is.h + 2 * ph - kh + 1;
    let ow = is.w + 2 * pw - kw + 1;
    let mut out = Tensor::zeros(Shape::new(is.n, ks.n, oh, ow)).unwrap();
    for n in 0..is.n {
        for o in 0..ks.n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = k.bias[o].as_f64();
                    for c in 0..is.c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = oy + ky;
                                let ix = ox + kx;
                                if iy < ph || ix < pw || iy - ph >= is.h || ix - pw >= is.w {
                                    continue;
                                }
                                acc += input.at(n, c, iy - ph, ix - pw).as_f64()
                                    * k.weights.at(o, c, ky, kx).as_f64();
                            }
                        }
                    }
                    *out.at_mut(n, o, oy, ox) = T::from_f64(acc);
                }
            }
        }
    }
    out
}

/// Window scan for 2×2 max pooling with stride 2 (dims must be even).
pub fn maxpool2x2<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let is = input.shape();
    let mut out = Tensor::zeros(Shape::new(is.n, is.c, is.h / 2, is.w / 2)).unwrap();
    for n in 0..is.n {
        for c in 0..is.c {
            for oy in 0..is.h / 2 {
                for ox in 0..is.w / 2 {
                    let mut best = input.at(n, c, 2 * oy, 2 * ox);
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let v = input.at(n, c, 2 * oy + dy, 2 * ox + dx);
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    *out.at_mut(n, c, oy, ox) = best;
                }
            }
        }
    }
    out
}

/// Scatter-accumulate transpose convolution, 2×2 kernel, stride 2.
pub fn upconv2x2<T: Scalar>(input: &Tensor<T>, k: &ConvKernel<T>) -> Tensor<T> {
    let is = input.shape();
    let ks = k.weights.shape();
    let mut out = Tensor::zeros(Shape::new(is.n, ks.n, 2 * is.h, 2 * is.w)).unwrap();
    for n in 0..is.n {
        for o in 0..ks.n {
            let bias = k.bias[o];
            for v in out.plane_mut(n, o) {
                *v = bias;
            }
        }
        for o in 0..ks.n {
            for c in 0..is.c {
                for y in 0..is.h {
                    for x in 0..is.w {
                        let v = input.at(n, c, y, x);
                        for dy in 0..2 {
                            for dx in 0..2 {
                                *out.at_mut(n, o, 2 * y + dy, 2 * x + dx) +=
                                    v * k.weights.at(o, c, dy, dx);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// 2×2 convolution with stride 2, no padding, no bias: the adjoint of
/// [`upconv2x2`] with the same kernel.
pub fn conv2x2_stride2<T: Scalar>(input: &Tensor<T>, k: &ConvKernel<T>) -> Tensor<T> {
    let is = input.shape();
    let ks = k.weights.shape();
    // Kernel is (out_c, in_c, 2, 2) in upconv orientation: here it maps
    // ks.n input channels down to ks.c output channels.
    let mut out = Tensor::zeros(Shape::new(is.n, ks.c, is.h / 2, is.w / 2)).unwrap();
    for n in 0..is.n {
        for c in 0..ks.c {
            for oy in 0..is.h / 2 {
                for ox in 0..is.w / 2 {
                    let mut acc = T::zero();
                    for o in 0..ks.n {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                acc = acc
                                    + input.at(n, o, 2 * oy + dy, 2 * ox + dx)
                                        * k.weights.at(o, c, dy, dx);
                            }
                        }
                    }
                    *out.at_mut(n, c, oy, ox) = acc;
                }
            }
        }
    }
    out
}
