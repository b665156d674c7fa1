//! Greyscale images normalized to [0, 1].

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Dense 2-D float image, row-major, values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct GreyImage {
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl GreyImage {
    pub fn zeros(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Shape(format!("empty image {h}x{w}")));
        }
        Ok(GreyImage {
            h,
            w,
            data: vec![0.0; h * w],
        })
    }

    pub fn filled(h: usize, w: usize, v: f32) -> Result<Self> {
        let mut img = Self::zeros(h, w)?;
        img.data.fill(v);
        Ok(img)
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if h == 0 || w == 0 || data.len() != h * w {
            return Err(Error::Shape(format!(
                "buffer of {} floats does not fill {h}x{w}",
                data.len()
            )));
        }
        Ok(GreyImage { h, w, data })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f32) {
        self.data[y * self.w + x] = v;
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn clamp01(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Snap to the 8-bit grid, matching what a save/load round trip yields.
    pub fn quantize_8bit(&mut self) {
        for v in &mut self.data {
            *v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
        }
    }

    /// Greyscale inversion x ↦ 1−x.
    pub fn inverted(&self) -> GreyImage {
        GreyImage {
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| 1.0 - v).collect(),
        }
    }

    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_vec(Shape::new(1, 1, self.h, self.w), self.data.clone())
            .expect("image dims are non-zero")
    }

    pub fn rot90(&self, quarter_turns: usize) -> GreyImage {
        let (data, h, w) = rot90_plane(&self.data, self.h, self.w, quarter_turns);
        GreyImage { h, w, data }
    }

    pub fn flip_horizontal(&self) -> GreyImage {
        let mut out = self.clone();
        for y in 0..self.h {
            for x in 0..self.w {
                out.data[y * self.w + x] = self.data[y * self.w + (self.w - 1 - x)];
            }
        }
        out
    }

    pub fn flip_vertical(&self) -> GreyImage {
        let mut out = self.clone();
        for y in 0..self.h {
            let src = &self.data[(self.h - 1 - y) * self.w..(self.h - y) * self.w];
            out.data[y * self.w..(y + 1) * self.w].copy_from_slice(src);
        }
        out
    }
}

/// Rotate a row-major plane by `k` quarter turns counter-clockwise.
/// Returns the rotated buffer and its (h, w).
pub fn rot90_plane<T: Copy>(data: &[T], h: usize, w: usize, k: usize) -> (Vec<T>, usize, usize) {
    let k = k % 4;
    match k {
        0 => (data.to_vec(), h, w),
        2 => {
            let mut out = data.to_vec();
            out.reverse();
            (out, h, w)
        }
        1 => {
            // out[y][x] = in[x][w-1-y]; out dims (w, h)
            let mut out = Vec::with_capacity(data.len());
            for y in 0..w {
                for x in 0..h {
                    out.push(data[x * w + (w - 1 - y)]);
                }
            }
            (out, w, h)
        }
        _ => {
            // k = 3: out[y][x] = in[h-1-x][y]; out dims (w, h)
            let mut out = Vec::with_capacity(data.len());
            for y in 0..w {
                for x in 0..h {
                    out.push(data[(h - 1 - x) * w + y]);
                }
            }
            (out, w, h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rot90_four_times_is_identity() {
        let img = GreyImage::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let r = img.rot90(1).rot90(1).rot90(1).rot90(1);
        assert_eq!(r, img);
        assert_eq!(img.rot90(1).dims(), (3, 2));
        assert_eq!(img.rot90(2).dims(), (2, 3));
    }

    #[test]
    fn rot90_composition() {
        let img = GreyImage::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(img.rot90(1).rot90(1), img.rot90(2));
        assert_eq!(img.rot90(3).rot90(1), img);
        // CCW quarter turn: top-right goes to top-left.
        assert_eq!(img.rot90(1).at(0, 0), 2.0);
    }

    #[test]
    fn inversion_is_involution() {
        let img = GreyImage::from_vec(1, 3, vec![0.0, 0.25, 1.0]).unwrap();
        assert_eq!(img.inverted().inverted(), img);
    }

    #[test]
    fn flips_are_involutions() {
        let img = GreyImage::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(img.flip_horizontal().flip_horizontal(), img);
        assert_eq!(img.flip_vertical().flip_vertical(), img);
        assert_eq!(img.flip_horizontal().at(0, 0), 3.0);
        assert_eq!(img.flip_vertical().at(0, 0), 4.0);
    }
}
