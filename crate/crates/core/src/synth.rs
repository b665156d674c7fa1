//! Synthetic Kerr-microscopy image generator.
//!
//! Desk-scale stand-in for real MOKE data: bright background, dark
//! elliptical skyrmions, optional clipped-bright defects with darker
//! shadow-like halos, a linear intensity gradient and Gaussian noise.
//! Ground-truth masks come out exact, in both 3-class and 2-class views
//! (defects fold into background in the 2-class view).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::grey::GreyImage;
use crate::mask::{ClassMask, CLASS_DEFECT, CLASS_SKYRMION};
use crate::seeds::{self, stream};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub train_images: usize,
    pub val_images: usize,
    pub test_images: usize,
    pub height: usize,
    pub width: usize,
    /// 2 or 3; controls the emitted mask view, the rendered scene is the same.
    pub classes: usize,
    /// Target skyrmion pixel fraction per image.
    pub skyrmion_fraction: f64,
    /// Semi-major axis range of skyrmion ellipses, in pixels.
    pub radius_min: f64,
    pub radius_max: f64,
    /// Axis ratio upper bound (1 = circles).
    pub eccentricity_max: f64,
    /// Defects per image are drawn from 0..=defects_max.
    pub defects_max: usize,
    /// Per-image noise σ range.
    pub noise_min: f64,
    pub noise_max: f64,
    /// Linear intensity gradient amplitude bound (±).
    pub gradient_max: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            train_images: 80,
            val_images: 20,
            test_images: 20,
            height: 128,
            width: 128,
            classes: 3,
            skyrmion_fraction: 0.19,
            radius_min: 4.0,
            radius_max: 20.0,
            eccentricity_max: 1.5,
            defects_max: 2,
            noise_min: 0.02,
            noise_max: 0.22,
            gradient_max: 0.15,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < 16 || self.width < 16 {
            return Err(Error::Config("synthetic images must be at least 16x16".into()));
        }
        if !(self.classes == 2 || self.classes == 3) {
            return Err(Error::Config("classes must be 2 or 3".into()));
        }
        if !(0.0..0.5).contains(&self.skyrmion_fraction) {
            return Err(Error::Config(
                "skyrmion fraction must be in [0, 0.5) (denser packings do not fit)".into(),
            ));
        }
        if self.radius_min < 1.0 || self.radius_max < self.radius_min {
            return Err(Error::Config("invalid skyrmion radius range".into()));
        }
        if self.eccentricity_max < 1.0 {
            return Err(Error::Config("eccentricity bound must be >= 1".into()));
        }
        if self.noise_max < self.noise_min || self.noise_min < 0.0 {
            return Err(Error::Config("invalid noise range".into()));
        }
        Ok(())
    }
}

const BG_GREY: f64 = 0.70;
const SKYRMION_GREY: f64 = 0.25;
const DEFECT_GREY: f64 = 0.95;
/// Consecutive failed placements tolerated before giving up on an image.
const MAX_PLACEMENT_RETRIES: usize = 500;

struct Placed {
    cy: f64,
    cx: f64,
    bound: f64,
}

fn overlaps(placed: &[Placed], cy: f64, cx: f64, bound: f64) -> bool {
    placed.iter().any(|p| {
        let dy = p.cy - cy;
        let dx = p.cx - cx;
        (dy * dy + dx * dx).sqrt() < p.bound + bound + 2.0
    })
}

/// True when the ellipse (inflated by a 1.5 px separation margin) covers
/// only background pixels, so instances stay disjoint for counting.
fn region_free(mask: &ClassMask, cy: f64, cx: f64, a: f64, b: f64, theta: f64) -> bool {
    let (h, w) = mask.dims();
    let (a, b) = (a + 1.5, b + 1.5);
    let bound = a.max(b);
    let y0 = ((cy - bound).floor().max(0.0)) as usize;
    let y1 = ((cy + bound).ceil().min(h as f64 - 1.0)) as usize;
    let x0 = ((cx - bound).floor().max(0.0)) as usize;
    let x1 = ((cx + bound).ceil().min(w as f64 - 1.0)) as usize;
    let (sin, cos) = theta.sin_cos();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dy = y as f64 - cy;
            let dx = x as f64 - cx;
            let u = (dx * cos + dy * sin) / a;
            let v = (-dx * sin + dy * cos) / b;
            if u * u + v * v <= 1.0 && mask.at(y, x) != 0 {
                return false;
            }
        }
    }
    true
}

fn paint_ellipse(
    img: &mut GreyImage,
    mask: &mut ClassMask,
    cy: f64,
    cx: f64,
    a: f64,
    b: f64,
    theta: f64,
    grey: f32,
    class: u8,
) -> usize {
    let (h, w) = img.dims();
    let bound = a.max(b);
    let y0 = ((cy - bound).floor().max(0.0)) as usize;
    let y1 = ((cy + bound).ceil().min(h as f64 - 1.0)) as usize;
    let x0 = ((cx - bound).floor().max(0.0)) as usize;
    let x1 = ((cx + bound).ceil().min(w as f64 - 1.0)) as usize;
    let (sin, cos) = theta.sin_cos();
    let mut painted = 0;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dy = y as f64 - cy;
            let dx = x as f64 - cx;
            let u = (dx * cos + dy * sin) / a;
            let v = (-dx * sin + dy * cos) / b;
            if u * u + v * v <= 1.0 {
                img.set(y, x, grey);
                mask.set(y, x, class);
                painted += 1;
            }
        }
    }
    painted
}

fn paint_defect(
    img: &mut GreyImage,
    mask: &mut ClassMask,
    rng: &mut ChaCha8Rng,
    placed: &mut Vec<Placed>,
) {
    let (h, w) = img.dims();
    let blob_r = rng.random_range(4.0..7.0);
    let reach = blob_r * 2.8;
    let margin = reach + 2.0;
    if 2.0 * margin >= h as f64 || 2.0 * margin >= w as f64 {
        return;
    }
    let cy = rng.random_range(margin..h as f64 - margin);
    let cx = rng.random_range(margin..w as f64 - margin);
    if overlaps(placed, cy, cx, reach) {
        return;
    }
    placed.push(Placed {
        cy,
        cx,
        bound: reach,
    });

    // Shadow fragments first: blobs at *skyrmion* intensity hugging the
    // bright spot, the way continuous background subtraction smears dark
    // shapes around clipped defects. Intensity alone cannot separate them
    // from skyrmions; only the adjacent bright blob can.
    let n_shadows = rng.random_range(2..4usize);
    for _ in 0..n_shadows {
        let dir = rng.random_range(0.0..std::f64::consts::TAU);
        let dist = blob_r * rng.random_range(1.05..1.55);
        let r = blob_r * rng.random_range(0.6..1.0);
        let ecc = rng.random_range(1.0..1.5);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let grey = (SKYRMION_GREY + rng.random_range(-0.03..0.03)) as f32;
        paint_ellipse(
            img,
            mask,
            cy + dist * dir.sin(),
            cx + dist * dir.cos(),
            r,
            r / ecc,
            theta,
            grey,
            CLASS_DEFECT,
        );
    }

    // Bright, near-clipped blob on top: union of a few overlapping disks
    // for an irregular outline.
    let n_disks = rng.random_range(2..5usize);
    for _ in 0..n_disks {
        let r = rng.random_range(blob_r * 0.5..blob_r);
        let dy = rng.random_range(-blob_r * 0.4..blob_r * 0.4);
        let dx = rng.random_range(-blob_r * 0.4..blob_r * 0.4);
        let grey = (DEFECT_GREY + rng.random_range(0.0..0.05)) as f32;
        paint_ellipse(
            img,
            mask,
            cy + dy,
            cx + dx,
            r,
            r,
            0.0,
            grey,
            CLASS_DEFECT,
        );
    }
}

fn generate_image(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<(GreyImage, ClassMask)> {
    let (h, w) = (spec.height, spec.width);
    let bg = (BG_GREY + rng.random_range(-0.03..0.03)) as f32;
    let mut img = GreyImage::filled(h, w, bg)?;
    let mut mask = ClassMask::zeros(h, w)?;
    let mut placed = Vec::new();

    let n_defects = if spec.defects_max > 0 {
        rng.random_range(1..=spec.defects_max)
    } else {
        0
    };
    for _ in 0..n_defects {
        paint_defect(&mut img, &mut mask, rng, &mut placed);
    }

    let target_px = (spec.skyrmion_fraction * (h * w) as f64) as usize;
    let mut skyrmion_px = 0usize;
    let mut failures = 0usize;
    while skyrmion_px < target_px {
        if failures > MAX_PLACEMENT_RETRIES {
            if skyrmion_px as f64 >= 0.7 * target_px as f64 {
                break;
            }
            return Err(Error::Data(format!(
                "cannot pack skyrmion fraction {} into {h}x{w} (placed {skyrmion_px} of {target_px} px)",
                spec.skyrmion_fraction
            )));
        }
        let a = rng.random_range(spec.radius_min..=spec.radius_max);
        let ecc = rng.random_range(1.0..=spec.eccentricity_max);
        let b = a / ecc;
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let bound = a;
        if 2.0 * (bound + 1.0) >= h as f64 || 2.0 * (bound + 1.0) >= w as f64 {
            failures += 1;
            continue;
        }
        let cy = rng.random_range(bound + 1.0..h as f64 - bound - 1.0);
        let cx = rng.random_range(bound + 1.0..w as f64 - bound - 1.0);
        if !region_free(&mask, cy, cx, a, b, theta) {
            failures += 1;
            continue;
        }
        let grey = (SKYRMION_GREY + rng.random_range(-0.03..0.03)) as f32;
        skyrmion_px += paint_ellipse(&mut img, &mut mask, cy, cx, a, b, theta, grey, CLASS_SKYRMION);
        failures = 0;
    }

    // Linear intensity gradient along a random direction.
    let gdir = rng.random_range(0.0..std::f64::consts::TAU);
    let gmag = rng.random_range(0.0..=spec.gradient_max);
    let (gs, gc) = gdir.sin_cos();
    let diag = ((h * h + w * w) as f64).sqrt();
    for y in 0..h {
        for x in 0..w {
            let t = 2.0 * (y as f64 * gs + x as f64 * gc) / diag;
            let v = img.at(y, x) + (gmag * t) as f32;
            img.set(y, x, v);
        }
    }

    // Per-image Gaussian noise.
    let sigma = rng.random_range(spec.noise_min..=spec.noise_max);
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma positive");
        for v in img.data_mut() {
            *v += normal.sample(rng) as f32;
        }
    }
    img.clamp01();
    img.quantize_8bit();

    if spec.classes == 2 {
        mask = mask.collapse_defects();
    }
    Ok((img, mask))
}

/// Generate a full dataset; a pure function of (spec, seed).
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let make_split = |name: &str, count: usize, tag: u64| -> Result<Vec<Sample>> {
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let mut rng = seeds::rng(seeds::mix(&[seed, stream::SYNTH, tag, i as u64]));
            let (img, mask) = generate_image(spec, &mut rng)?;
            out.push(Sample::new(img, mask, format!("{name}-{i:04}"))?);
        }
        Ok(out)
    };
    Ok(LabeledDataset {
        train: make_split("train", spec.train_images, 1)?,
        val: make_split("val", spec.val_images, 2)?,
        test: make_split("test", spec.test_images, 3)?,
        num_classes: spec.classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::split_summary;

    #[test]
    fn zero_skyrmions_gives_background_mask() {
        let spec = SynthSpec {
            train_images: 2,
            val_images: 0,
            test_images: 0,
            skyrmion_fraction: 0.0,
            defects_max: 0,
            ..Default::default()
        };
        let ds = synth_generate(&spec, 1).unwrap();
        for s in &ds.train {
            assert!(s.mask.data().iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = SynthSpec {
            train_images: 2,
            val_images: 1,
            test_images: 1,
            height: 64,
            width: 64,
            ..Default::default()
        };
        let a = synth_generate(&spec, 7).unwrap();
        let b = synth_generate(&spec, 7).unwrap();
        for (x, y) in a.train.iter().zip(&b.train) {
            assert_eq!(x.image, y.image);
            assert_eq!(x.mask, y.mask);
        }
    }

    #[test]
    fn achieves_requested_skyrmion_fraction() {
        // Mean over 100 images within ±0.05 of the requested 0.19.
        let spec = SynthSpec {
            train_images: 100,
            val_images: 0,
            test_images: 0,
            ..Default::default()
        };
        let ds = synth_generate(&spec, 11).unwrap();
        let summary = split_summary(&ds);
        let frac = summary.train.skyrmion_pixel_fraction;
        assert!(
            (frac - 0.19).abs() < 0.05,
            "skyrmion fraction {frac} not within 0.19±0.05"
        );
    }

    #[test]
    fn impossible_packing_errors() {
        let spec = SynthSpec {
            train_images: 1,
            val_images: 0,
            test_images: 0,
            skyrmion_fraction: 0.45,
            radius_min: 11.0,
            radius_max: 12.0,
            height: 40,
            width: 40,
            defects_max: 0,
            ..Default::default()
        };
        assert!(matches!(synth_generate(&spec, 3), Err(Error::Data(_))));
    }

    #[test]
    fn two_class_view_has_no_defect_labels_but_same_scene() {
        let mut spec = SynthSpec {
            train_images: 3,
            val_images: 0,
            test_images: 0,
            defects_max: 3,
            ..Default::default()
        };
        let three = synth_generate(&spec, 21).unwrap();
        spec.classes = 2;
        let two = synth_generate(&spec, 21).unwrap();
        let mut saw_defect = false;
        for (a, b) in three.train.iter().zip(&two.train) {
            assert_eq!(a.image, b.image);
            assert!(b.mask.max_class() <= 1);
            if a.mask.data().iter().any(|&v| v == CLASS_DEFECT) {
                saw_defect = true;
                assert_eq!(&a.mask.collapse_defects(), &b.mask);
            }
        }
        assert!(saw_defect, "no defects generated across 3 images");
    }

    #[test]
    fn images_are_quantized_and_bounded() {
        let spec = SynthSpec {
            train_images: 2,
            val_images: 0,
            test_images: 0,
            height: 64,
            width: 64,
            ..Default::default()
        };
        let ds = synth_generate(&spec, 5).unwrap();
        for s in &ds.train {
            for &v in s.image.data() {
                assert!((0.0..=1.0).contains(&v));
                let q = (v * 255.0).round() / 255.0;
                assert!((v - q).abs() < 1e-6);
            }
        }
    }
}
