//! 2×2 max pooling with stride 2.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Argmax positions recorded by the forward pass, as flat indices into each
/// input (batch, channel) plane. Ties go to the first element in row-major
/// window order so the backward pass is deterministic.
#[derive(Clone, Debug)]
pub struct PoolIndices {
    pub input_shape: Shape,
    pub argmax: Vec<u32>,
}

pub fn maxpool2x2_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    let is = input.shape();
    if is.h % 2 != 0 || is.w % 2 != 0 {
        return Err(Error::Shape(format!(
            "max pooling needs even spatial dims, got {}x{}",
            is.h, is.w
        )));
    }
    let (oh, ow) = (is.h / 2, is.w / 2);
    let mut out = Tensor::zeros(Shape::new(is.n, is.c, oh, ow))?;
    let mut argmax = vec![0u32; out.shape().len()];
    let mut pos = 0;
    for n in 0..is.n {
        for c in 0..is.c {
            let plane = input.plane(n, c);
            let out_plane = out.plane_mut(n, c);
            for oy in 0..oh {
                for ox in 0..ow {
                    let base = 2 * oy * is.w + 2 * ox;
                    let mut best_idx = base;
                    let mut best = plane[base];
                    for &idx in &[base + 1, base + is.w, base + is.w + 1] {
                        if plane[idx] > best {
                            best = plane[idx];
                            best_idx = idx;
                        }
                    }
                    out_plane[oy * ow + ox] = best;
                    argmax[pos] = best_idx as u32;
                    pos += 1;
                }
            }
        }
    }
    Ok((
        out,
        PoolIndices {
            input_shape: is,
            argmax,
        },
    ))
}

/// Routes each output gradient to its recorded argmax position; every other
/// input position receives zero.
pub fn maxpool2x2_backward<T: Scalar>(
    indices: &PoolIndices,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let is = indices.input_shape;
    let gs = grad_out.shape();
    let expected = Shape::new(is.n, is.c, is.h / 2, is.w / 2);
    if gs != expected {
        return Err(Error::Shape(format!(
            "grad_out shape {gs} does not match pooled shape {expected}"
        )));
    }
    if indices.argmax.len() != gs.len() {
        return Err(Error::Internal(
            "pool indices do not match grad_out size".into(),
        ));
    }
    let mut grad_input = Tensor::zeros(is)?;
    let plane_len = is.h * is.w;
    let mut pos = 0;
    for n in 0..is.n {
        for c in 0..is.c {
            let g_plane = grad_out.plane(n, c);
            let in_plane = grad_input.plane_mut(n, c);
            for &g in g_plane {
                let idx = indices.argmax[pos] as usize;
                if idx >= plane_len {
                    return Err(Error::Internal("pool argmax out of range".into()));
                }
                in_plane[idx] += g;
                pos += 1;
            }
        }
    }
    Ok(grad_input)
}
