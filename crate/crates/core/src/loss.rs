//! Label smoothing and the weighted cross-entropy loss.

use crate::error::{Error, Result};
use crate::mask::ClassMask;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Loss hyperparameters.
#[derive(Clone, Debug)]
pub struct LossConfig {
    /// Label smoothing α in [0, 1): target = (1−α)·onehot + α/K.
    pub smoothing_alpha: f64,
    /// Per-class weights; `None` means all ones.
    pub class_weights: Option<Vec<f64>>,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            smoothing_alpha: 0.2,
            class_weights: None,
        }
    }
}

impl LossConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.smoothing_alpha) {
            return Err(Error::Config(format!(
                "label smoothing must be in [0, 1), got {}",
                self.smoothing_alpha
            )));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != num_classes {
                return Err(Error::Config(format!(
                    "{} class weights for {} classes",
                    w.len(),
                    num_classes
                )));
            }
            if w.iter().any(|&v| v <= 0.0) {
                return Err(Error::Config("class weights must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn weights(&self, num_classes: usize) -> Vec<f64> {
        self.class_weights
            .clone()
            .unwrap_or_else(|| vec![1.0; num_classes])
    }
}

/// Smoothed one-hot targets for a batch of masks, shaped (n, K, h, w):
/// per pixel, target = (1−α)·onehot + α/K.
pub fn smoothed_targets<T: Scalar>(
    masks: &[&ClassMask],
    num_classes: usize,
    alpha: f64,
) -> Result<Tensor<T>> {
    if masks.is_empty() {
        return Err(Error::Data("no masks to encode".into()));
    }
    let (h, w) = masks[0].dims();
    let off = T::from_f64(alpha / num_classes as f64);
    let on = T::from_f64(1.0 - alpha + alpha / num_classes as f64);
    let mut out = Tensor::filled(Shape::new(masks.len(), num_classes, h, w), off)?;
    for (n, mask) in masks.iter().enumerate() {
        if mask.dims() != (h, w) {
            return Err(Error::Shape("masks in batch differ in size".into()));
        }
        for (pix, &cls) in mask.data().iter().enumerate() {
            if cls as usize >= num_classes {
                return Err(Error::Data(format!(
                    "mask holds class {cls} but the model has {num_classes} classes"
                )));
            }
            out.plane_mut(n, cls as usize)[pix] = on;
        }
    }
    Ok(out)
}

/// Loss value plus the gradient with respect to the *logits* (softmax and
/// cross-entropy fused).
pub struct LossOutput<T> {
    pub loss: f64,
    pub grad_logits: Tensor<T>,
    /// Pixels whose targeted probability had to be clamped at 1e-12.
    pub clamped: usize,
}

/// Mean over pixels of −Σ_c w_c·t_c·log p_c. The exact logit gradient is
/// (Σ_c w_c t_c)·p − w⊙t per pixel, divided by the pixel count; for unit
/// weights this is the familiar (p − t)/N.
pub fn cross_entropy_loss<T: Scalar>(
    probabilities: &Tensor<T>,
    targets: &Tensor<T>,
    weights: &[f64],
) -> Result<LossOutput<T>> {
    let s = probabilities.shape();
    if targets.shape() != s {
        return Err(Error::Shape(format!(
            "targets {} vs probabilities {}",
            targets.shape(),
            s
        )));
    }
    if weights.len() != s.c {
        return Err(Error::Config(format!(
            "{} class weights for {} channels",
            weights.len(),
            s.c
        )));
    }
    let hw = s.h * s.w;
    let n_pixels = (s.n * hw) as f64;
    let inv_n = T::from_f64(1.0 / n_pixels);
    let mut grad = Tensor::zeros(s)?;
    let mut loss = 0.0f64;
    let mut clamped = 0usize;
    for n in 0..s.n {
        for pix in 0..hw {
            // Pixel weight Σ_c w_c·t_c scales the softmax part of the grad.
            let mut pixel_w = 0.0f64;
            for c in 0..s.c {
                let t = targets.plane(n, c)[pix].as_f64();
                if t != 0.0 {
                    let w = weights[c];
                    pixel_w += w * t;
                    let mut p = probabilities.plane(n, c)[pix].as_f64();
                    if p < 1e-12 {
                        p = 1e-12;
                        clamped += 1;
                    }
                    loss -= w * t * p.ln();
                }
            }
            for c in 0..s.c {
                let t = targets.plane(n, c)[pix].as_f64();
                let p = probabilities.plane(n, c)[pix].as_f64();
                let g = pixel_w * p - weights[c] * t;
                grad.plane_mut(n, c)[pix] = T::from_f64(g) * inv_n;
            }
        }
    }
    Ok(LossOutput {
        loss: loss / n_pixels,
        grad_logits: grad,
        clamped,
    })
}
