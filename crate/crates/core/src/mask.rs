//! Per-pixel class masks.

use crate::error::{Error, Result};

/// Class indices are fixed globally: 0 background, 1 skyrmion, 2 defect.
pub const CLASS_BACKGROUND: u8 = 0;
pub const CLASS_SKYRMION: u8 = 1;
pub const CLASS_DEFECT: u8 = 2;

/// Dense 2-D map of small class indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassMask {
    h: usize,
    w: usize,
    data: Vec<u8>,
}

impl ClassMask {
    pub fn zeros(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Shape(format!("empty mask {h}x{w}")));
        }
        Ok(ClassMask {
            h,
            w,
            data: vec![0; h * w],
        })
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<u8>) -> Result<Self> {
        if h == 0 || w == 0 || data.len() != h * w {
            return Err(Error::Shape(format!(
                "mask buffer of {} bytes does not fill {h}x{w}",
                data.len()
            )));
        }
        Ok(ClassMask { h, w, data })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: u8) {
        self.data[y * self.w + x] = v;
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn max_class(&self) -> u8 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Fraction of pixels equal to `class_id`.
    pub fn class_fraction(&self, class_id: u8) -> f64 {
        let count = self.data.iter().filter(|&&v| v == class_id).count();
        count as f64 / self.data.len() as f64
    }

    /// Reinterpret as a 2-class mask: defects become background.
    pub fn collapse_defects(&self) -> ClassMask {
        let data = self
            .data
            .iter()
            .map(|&v| if v == CLASS_DEFECT { CLASS_BACKGROUND } else { v })
            .collect();
        ClassMask {
            h: self.h,
            w: self.w,
            data,
        }
    }
}
