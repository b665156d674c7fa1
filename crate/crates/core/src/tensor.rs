//! Dense rank-4 tensor in (batch, channel, row, col) layout.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dimensions of a [`Tensor`]: batch, channels, rows, cols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{},{})", self.n, self.c, self.h, self.w)
    }
}

/// Contiguous row-major (n,c,h,w) tensor of floats; the unit of all layer
/// computation. All dims are ≥ 1 by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Zero-filled tensor. Errors if any dimension is zero.
    pub fn zeros(shape: Shape) -> Result<Self> {
        if shape.n == 0 || shape.c == 0 || shape.h == 0 || shape.w == 0 {
            return Err(Error::Shape(format!("empty tensor shape {shape}")));
        }
        Ok(Tensor {
            shape,
            data: vec![T::zero(); shape.len()],
        })
    }

    pub fn filled(shape: Shape, value: T) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        t.data.fill(value);
        Ok(t)
    }

    /// Wrap an existing buffer; length must equal the shape volume.
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if shape.n == 0 || shape.c == 0 || shape.h == 0 || shape.w == 0 {
            return Err(Error::Shape(format!("empty tensor shape {shape}")));
        }
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "buffer of {} elements does not fill shape {shape}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.shape.h * self.shape.w
    }

    /// Slice covering one (batch, channel) plane of h·w elements.
    #[inline]
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let hw = self.plane_len();
        let start = (n * self.shape.c + c) * hw;
        &self.data[start..start + hw]
    }

    #[inline]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let hw = self.plane_len();
        let start = (n * self.shape.c + c) * hw;
        &mut self.data[start..start + hw]
    }

    /// All channel planes for one batch item, c·h·w contiguous elements.
    #[inline]
    pub fn item(&self, n: usize) -> &[T] {
        let chw = self.shape.c * self.plane_len();
        &self.data[n * chw..(n + 1) * chw]
    }

    #[inline]
    pub fn item_mut(&mut self, n: usize) -> &mut [T] {
        let chw = self.shape.c * self.plane_len();
        &mut self.data[n * chw..(n + 1) * chw]
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        let s = self.shape;
        self.data[((n * s.c + c) * s.h + y) * s.w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut T {
        let s = self.shape;
        &mut self.data[((n * s.c + c) * s.h + y) * s.w + x]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise product, used for dropout masks and activation chains.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "hadamard of {} with {}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .collect();
        Ok(Tensor {
            shape: self.shape,
            data,
        })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "add of {} with {}",
                self.shape, other.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Sum of all elements, accumulated in f64 for stability.
    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64()).sum()
    }

    /// Inner product ⟨self, other⟩ in f64.
    pub fn dot_f64(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.as_f64() * b.as_f64())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Convert element type, e.g. for the 64-bit gradient-check shadow mode.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_dims() {
        assert!(Tensor::<f32>::zeros(Shape::new(0, 1, 2, 2)).is_err());
        assert!(Tensor::<f32>::zeros(Shape::new(1, 1, 0, 2)).is_err());
    }

    #[test]
    fn rejects_wrong_buffer_len() {
        assert!(Tensor::<f32>::from_vec(Shape::new(1, 1, 2, 2), vec![0.0; 3]).is_err());
    }

    #[test]
    fn plane_indexing_matches_at() {
        let mut t = Tensor::<f32>::zeros(Shape::new(2, 3, 4, 5)).unwrap();
        *t.at_mut(1, 2, 3, 4) = 7.5;
        let plane = t.plane(1, 2);
        assert_eq!(plane[3 * 5 + 4], 7.5);
        assert_eq!(t.at(1, 2, 3, 4), 7.5);
    }

    #[test]
    fn cast_round_trip_f32() {
        let t = Tensor::<f32>::from_vec(
            Shape::new(1, 1, 1, 4),
            vec![1.0, -2.5, 0.125, 3.0e-7],
        )
        .unwrap();
        let back: Tensor<f32> = t.cast::<f64>().cast();
        assert_eq!(t, back);
    }
}
