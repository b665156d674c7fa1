//! Channel concatenation for skip connections.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Stack `a`'s channels before `b`'s. Batch and spatial dims must agree;
/// same-padding guarantees this in the network, so a mismatch here means a
/// padding bug upstream.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.n != sb.n || sa.h != sb.h || sa.w != sb.w {
        return Err(Error::Shape(format!(
            "concat of {sa} with {sb}: batch/spatial dims differ"
        )));
    }
    let mut out = Tensor::zeros(Shape::new(sa.n, sa.c + sb.c, sa.h, sa.w))?;
    for n in 0..sa.n {
        for c in 0..sa.c {
            out.plane_mut(n, c).copy_from_slice(a.plane(n, c));
        }
        for c in 0..sb.c {
            out.plane_mut(n, sa.c + c).copy_from_slice(b.plane(n, c));
        }
    }
    Ok(out)
}

/// Inverse of [`concat_channels`]: split at channel `c_split`. The backward
/// pass of concatenation is exactly this partition of the output gradient.
pub fn split_channels<T: Scalar>(x: &Tensor<T>, c_split: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let s = x.shape();
    if c_split == 0 || c_split >= s.c {
        return Err(Error::Shape(format!(
            "cannot split {} channels at {c_split}",
            s.c
        )));
    }
    let mut a = Tensor::zeros(Shape::new(s.n, c_split, s.h, s.w))?;
    let mut b = Tensor::zeros(Shape::new(s.n, s.c - c_split, s.h, s.w))?;
    for n in 0..s.n {
        for c in 0..c_split {
            a.plane_mut(n, c).copy_from_slice(x.plane(n, c));
        }
        for c in c_split..s.c {
            b.plane_mut(n, c - c_split).copy_from_slice(x.plane(n, c));
        }
    }
    Ok((a, b))
}
