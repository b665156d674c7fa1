//! Test-time augmentation: average predictions over transformed inputs
//! mapped back to the original frame.

use crate::error::Result;
use crate::grey::{rot90_plane, GreyImage};
use crate::mask::ClassMask;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};
use crate::unet::{self, RunMode, UNetConfig, UNetParams};

/// Invertible image transforms usable at prediction time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TtaTransform {
    Identity,
    /// Quarter turns counter-clockwise (1–3).
    Rot90(usize),
    FlipH,
    FlipV,
}

impl TtaTransform {
    fn apply_image(&self, img: &GreyImage) -> GreyImage {
        match self {
            TtaTransform::Identity => img.clone(),
            TtaTransform::Rot90(k) => img.rot90(*k),
            TtaTransform::FlipH => img.flip_horizontal(),
            TtaTransform::FlipV => img.flip_vertical(),
        }
    }

    /// Map a probability tensor back to the original frame.
    fn invert_probs<T: Scalar>(&self, probs: &Tensor<T>) -> Tensor<T> {
        match self {
            TtaTransform::Identity => probs.clone(),
            TtaTransform::Rot90(k) => {
                let s = probs.shape();
                let inv = (4 - (k % 4)) % 4;
                let mut planes = Vec::with_capacity(s.len());
                let mut new_dims = (s.h, s.w);
                for n in 0..s.n {
                    for c in 0..s.c {
                        let (rot, nh, nw) = rot90_plane(probs.plane(n, c), s.h, s.w, inv);
                        new_dims = (nh, nw);
                        planes.extend(rot);
                    }
                }
                Tensor::from_vec(Shape::new(s.n, s.c, new_dims.0, new_dims.1), planes)
                    .expect("rotation preserves volume")
            }
            TtaTransform::FlipH => {
                let s = probs.shape();
                let mut out = probs.clone();
                for n in 0..s.n {
                    for c in 0..s.c {
                        let src: Vec<T> = probs.plane(n, c).to_vec();
                        let dst = out.plane_mut(n, c);
                        for y in 0..s.h {
                            for x in 0..s.w {
                                dst[y * s.w + x] = src[y * s.w + (s.w - 1 - x)];
                            }
                        }
                    }
                }
                out
            }
            TtaTransform::FlipV => {
                let s = probs.shape();
                let mut out = probs.clone();
                for n in 0..s.n {
                    for c in 0..s.c {
                        let src: Vec<T> = probs.plane(n, c).to_vec();
                        let dst = out.plane_mut(n, c);
                        for y in 0..s.h {
                            dst[y * s.w..(y + 1) * s.w]
                                .copy_from_slice(&src[(s.h - 1 - y) * s.w..(s.h - y) * s.w]);
                        }
                    }
                }
                out
            }
        }
    }
}

/// The standard transform set: the three non-identity right-angle rotations
/// for square inputs; flips (plus identity) otherwise, since rotating a
/// non-square image changes its shape.
pub fn standard_transforms(h: usize, w: usize) -> Vec<TtaTransform> {
    if h == w {
        vec![
            TtaTransform::Rot90(1),
            TtaTransform::Rot90(2),
            TtaTransform::Rot90(3),
        ]
    } else {
        vec![
            TtaTransform::Identity,
            TtaTransform::FlipH,
            TtaTransform::FlipV,
        ]
    }
}

/// Predict with the given transforms: for each t, p = t⁻¹(forward(t(x)));
/// the output probabilities are the mean and the mask its argmax.
pub fn tta_predict_with(
    params: &UNetParams<f32>,
    config: &UNetConfig,
    image: &GreyImage,
    transforms: &[TtaTransform],
) -> Result<(Tensor<f32>, ClassMask)> {
    assert!(!transforms.is_empty());
    let mut mean: Option<Tensor<f32>> = None;
    for t in transforms {
        let transformed = t.apply_image(image);
        let (probs, _) = unet::forward(
            params,
            config,
            transformed.to_tensor(),
            RunMode::Infer,
            0,
        )?;
        let back = t.invert_probs(&probs);
        match &mut mean {
            None => mean = Some(back),
            Some(acc) => acc.add_assign(&back)?,
        }
    }
    let mut mean = mean.expect("at least one transform");
    mean.scale(1.0 / transforms.len() as f32);
    let mask = unet::predict_mask(&mean)?;
    Ok((mean, mask))
}

/// TTA with the standard transform set for the image's shape.
pub fn tta_predict(
    params: &UNetParams<f32>,
    config: &UNetConfig,
    image: &GreyImage,
) -> Result<(Tensor<f32>, ClassMask)> {
    let (h, w) = image.dims();
    tta_predict_with(params, config, image, &standard_transforms(h, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use rand::Rng;

    fn setup() -> (UNetConfig, UNetParams<f32>) {
        let config = UNetConfig {
            depth: 2,
            base_channels: 4,
            num_classes: 2,
            activation: ActivationKind::Relu,
            dropout_rate: 0.0,
            input_size: (16, 16),
        };
        let params = unet::init_params(&config, 3).unwrap();
        (config, params)
    }

    fn random_image(h: usize, w: usize, seed: u64) -> GreyImage {
        let mut rng = crate::seeds::rng(seed);
        GreyImage::from_vec(h, w, (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn identity_transforms_equal_plain_prediction() {
        let (config, params) = setup();
        let img = random_image(16, 16, 4);
        let (probs, mask) = tta_predict_with(
            &params,
            &config,
            &img,
            &[TtaTransform::Identity; 3],
        )
        .unwrap();
        let (plain, _) = unet::forward(&params, &config, img.to_tensor(), RunMode::Infer, 0)
            .unwrap();
        // Mean of three identical fields divided by 3: exact in f32 only up
        // to rounding; compare elementwise tightly.
        for (a, b) in probs.data().iter().zip(plain.data()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(mask, unet::predict_mask(&plain).unwrap());
    }

    #[test]
    fn constant_image_with_constant_field_equals_plain_prediction() {
        // With zeroed weights and a biased head the probability field is
        // constant, so it is exactly rotation-invariant and TTA must
        // reproduce the single prediction bit-for-bit.
        let (config, mut params) = setup();
        for (_, s) in params.flat_view_mut() {
            s.fill(0.0);
        }
        params.head.bias = vec![0.2, 0.9];
        let img = GreyImage::filled(16, 16, 0.4).unwrap();
        let (probs, mask) = tta_predict(&params, &config, &img).unwrap();
        let (plain, _) = unet::forward(&params, &config, img.to_tensor(), RunMode::Infer, 0)
            .unwrap();
        for (a, b) in probs.data().iter().zip(plain.data()) {
            assert!((a - b).abs() < 1e-7);
        }
        assert_eq!(mask, unet::predict_mask(&plain).unwrap());
    }

    #[test]
    fn matches_hand_composed_mean() {
        let (config, params) = setup();
        let img = random_image(16, 16, 9);
        let (probs, _) = tta_predict(&params, &config, &img).unwrap();

        let mut acc: Option<Tensor<f32>> = None;
        for k in 1..=3usize {
            let rotated = img.rot90(k);
            let (p, _) = unet::forward(&params, &config, rotated.to_tensor(), RunMode::Infer, 0)
                .unwrap();
            let s = p.shape();
            let mut planes = Vec::new();
            let mut dims = (s.h, s.w);
            for c in 0..s.c {
                let (r, nh, nw) = rot90_plane(p.plane(0, c), s.h, s.w, 4 - k);
                dims = (nh, nw);
                planes.extend(r);
            }
            let back = Tensor::from_vec(Shape::new(1, s.c, dims.0, dims.1), planes).unwrap();
            match &mut acc {
                None => acc = Some(back),
                Some(a) => a.add_assign(&back).unwrap(),
            }
        }
        let mut expected = acc.unwrap();
        expected.scale(1.0 / 3.0);
        assert_eq!(probs, expected);
    }

    #[test]
    fn non_square_falls_back_to_flips() {
        let (config, params) = setup();
        let img = random_image(16, 32, 10);
        let transforms = standard_transforms(16, 32);
        assert_eq!(
            transforms,
            vec![TtaTransform::Identity, TtaTransform::FlipH, TtaTransform::FlipV]
        );
        let (probs, _) = tta_predict(&params, &config, &img).unwrap();
        assert_eq!(probs.shape(), Shape::new(1, 2, 16, 32));
    }
}
