//! 2×2 transpose convolution with stride 2 (the U-Net up-sampling step).

use crate::conv::ConvKernel;
use crate::error::{Error, Result};
use crate::gemm::{gemm_a_bt, gemm_at_b, gemm_nn};
use crate::scalar::Scalar;
use crate::scratch;
use crate::tensor::{Shape, Tensor};

fn check<T: Scalar>(input: &Tensor<T>, k: &ConvKernel<T>) -> Result<()> {
    let is = input.shape();
    let ks = k.weights.shape();
    if ks.h != 2 || ks.w != 2 {
        return Err(Error::Shape(format!(
            "up-convolution kernel must be 2x2, got {}x{}",
            ks.h, ks.w
        )));
    }
    if is.c != ks.c {
        return Err(Error::Shape(format!(
            "input has {} channels but kernel expects {}",
            is.c, ks.c
        )));
    }
    Ok(())
}

/// Copy the (out_c × in_c) weight slice for one kernel tap (dy, dx).
fn tap_matrix<T: Scalar>(k: &ConvKernel<T>, dy: usize, dx: usize) -> Vec<T> {
    let ks = k.weights.shape();
    let mut m = vec![T::zero(); ks.n * ks.c];
    for o in 0..ks.n {
        for c in 0..ks.c {
            m[o * ks.c + c] = k.weights.at(o, c, dy, dx);
        }
    }
    m
}

/// Scatter-accumulate semantics: every input pixel contributes a 2×2 patch
/// to the doubled-resolution output, plus bias.
pub fn upconv2x2_forward<T: Scalar>(input: &Tensor<T>, k: &ConvKernel<T>) -> Result<Tensor<T>> {
    check(input, k)?;
    let is = input.shape();
    let ks = k.weights.shape();
    let (oc, ic) = (ks.n, ks.c);
    let hw = is.h * is.w;
    let mut out = Tensor::zeros(Shape::new(is.n, oc, 2 * is.h, 2 * is.w))?;
    let mut sub = scratch::take::<T>(oc * hw);
    for n in 0..is.n {
        for o in 0..oc {
            let bias = k.bias[o];
            out.plane_mut(n, o).fill(bias);
        }
        for dy in 0..2 {
            for dx in 0..2 {
                let w_tap = tap_matrix(k, dy, dx);
                sub.fill(T::zero());
                gemm_nn(oc, ic, hw, &w_tap, input.item(n), &mut sub);
                // Scatter rows of `sub` into the strided output positions.
                for o in 0..oc {
                    let out_plane = out.plane_mut(n, o);
                    for y in 0..is.h {
                        let src = &sub[o * hw + y * is.w..o * hw + (y + 1) * is.w];
                        let orow = (2 * y + dy) * 2 * is.w + dx;
                        for (x, &v) in src.iter().enumerate() {
                            out_plane[orow + 2 * x] += v;
                        }
                    }
                }
            }
        }
    }
    scratch::give(sub);
    Ok(out)
}

/// Adjoint of [`upconv2x2_forward`]: gradients with respect to input,
/// weights and bias.
pub fn upconv2x2_backward<T: Scalar>(
    input: &Tensor<T>,
    k: &ConvKernel<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, ConvKernel<T>)> {
    check(input, k)?;
    let is = input.shape();
    let ks = k.weights.shape();
    let gs = grad_out.shape();
    let expected = Shape::new(is.n, ks.n, 2 * is.h, 2 * is.w);
    if gs != expected {
        return Err(Error::Shape(format!(
            "grad_out shape {gs} does not match up-convolution output {expected}"
        )));
    }
    let (oc, ic) = (ks.n, ks.c);
    let hw = is.h * is.w;
    let mut grad_input = Tensor::zeros(is)?;
    let mut grad_w = Tensor::zeros(ks)?;
    let mut grad_b = vec![T::zero(); oc];
    let mut g_sub = scratch::take::<T>(oc * hw);
    let mut gw_tap = vec![T::zero(); oc * ic];
    for n in 0..is.n {
        for o in 0..oc {
            grad_b[o] = grad_b[o] + grad_out.plane(n, o).iter().copied().sum();
        }
        for dy in 0..2 {
            for dx in 0..2 {
                // Gather the strided sub-grid of grad_out for this tap.
                for o in 0..oc {
                    let g_plane = grad_out.plane(n, o);
                    for y in 0..is.h {
                        let grow = (2 * y + dy) * 2 * is.w + dx;
                        let dst = &mut g_sub[o * hw + y * is.w..o * hw + (y + 1) * is.w];
                        for (x, dv) in dst.iter_mut().enumerate() {
                            *dv = g_plane[grow + 2 * x];
                        }
                    }
                }
                // grad_W[o,c,dy,dx] += Σ_pix g_sub[o]·input[c]
                gw_tap.fill(T::zero());
                gemm_a_bt(oc, ic, hw, &g_sub, input.item(n), &mut gw_tap);
                for o in 0..oc {
                    for c in 0..ic {
                        *grad_w.at_mut(o, c, dy, dx) += gw_tap[o * ic + c];
                    }
                }
                // grad_input[c] += Σ_o w[o,c,dy,dx]·g_sub[o]
                let w_tap = tap_matrix(k, dy, dx);
                gemm_at_b(oc, ic, hw, &w_tap, &g_sub, grad_input.item_mut(n));
            }
        }
    }
    scratch::give(g_sub);
    Ok((grad_input, ConvKernel::new(grad_w, grad_b)?))
}
