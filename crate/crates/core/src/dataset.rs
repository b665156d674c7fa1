//! Dataset representation and directory I/O.
//!
//! On disk a dataset is `<split>/images/*.pgm|png` with matching
//! `<split>/masks/<stem>.png` (or `.pgm`), splits named `train`, `val`,
//! `test`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::components::{connected_components, Connectivity};
use crate::error::{Error, Result};
use crate::grey::GreyImage;
use crate::imageio;
use crate::mask::{ClassMask, CLASS_SKYRMION};

/// One image with its per-pixel labels.
#[derive(Clone, Debug)]
pub struct Sample {
    pub image: GreyImage,
    pub mask: ClassMask,
    pub source_id: String,
}

impl Sample {
    pub fn new(image: GreyImage, mask: ClassMask, source_id: impl Into<String>) -> Result<Self> {
        if image.dims() != mask.dims() {
            return Err(Error::Shape(format!(
                "image {}x{} vs mask {}x{}",
                image.dims().0,
                image.dims().1,
                mask.dims().0,
                mask.dims().1
            )));
        }
        Ok(Sample {
            image,
            mask,
            source_id: source_id.into(),
        })
    }
}

/// Train/validation/test splits sharing one class count.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    pub num_classes: usize,
}

impl LabeledDataset {
    /// 2-class view: defect labels become background everywhere.
    pub fn collapse_to_2class(&self) -> LabeledDataset {
        let fold = |samples: &[Sample]| {
            samples
                .iter()
                .map(|s| Sample {
                    image: s.image.clone(),
                    mask: s.mask.collapse_defects(),
                    source_id: s.source_id.clone(),
                })
                .collect()
        };
        LabeledDataset {
            train: fold(&self.train),
            val: fold(&self.val),
            test: fold(&self.test),
            num_classes: 2,
        }
    }
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        if ext == "pgm" || ext == "png" {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn load_split(split_dir: &Path, num_classes: usize) -> Result<Vec<Sample>> {
    let images_dir = split_dir.join("images");
    let masks_dir = split_dir.join("masks");
    if !images_dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut samples = Vec::new();
    for img_path in list_images(&images_dir)? {
        let stem = img_path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Data(format!("bad image name {}", img_path.display())))?;
        let mask_path = ["png", "pgm"]
            .iter()
            .map(|ext| masks_dir.join(format!("{stem}.{ext}")))
            .find(|p| p.is_file())
            .ok_or_else(|| {
                Error::Data(format!(
                    "no mask for image {} under {}",
                    img_path.display(),
                    masks_dir.display()
                ))
            })?;
        let image = imageio::load_image(&img_path)?;
        let mask = imageio::load_mask(&mask_path, num_classes)?;
        samples.push(Sample::new(image, mask, stem)?);
    }
    Ok(samples)
}

/// Load every split found under `root`. Masks are folded to the requested
/// class count (see [`imageio::load_mask`]).
pub fn load_dataset(root: &Path, num_classes: usize) -> Result<LabeledDataset> {
    if !root.is_dir() {
        return Err(Error::Data(format!(
            "dataset directory {} does not exist",
            root.display()
        )));
    }
    Ok(LabeledDataset {
        train: load_split(&root.join("train"), num_classes)?,
        val: load_split(&root.join("val"), num_classes)?,
        test: load_split(&root.join("test"), num_classes)?,
        num_classes,
    })
}

/// Write a dataset as PGM images + PNG masks in the standard layout.
pub fn save_dataset(root: &Path, dataset: &LabeledDataset) -> Result<()> {
    for (name, samples) in [
        ("train", &dataset.train),
        ("val", &dataset.val),
        ("test", &dataset.test),
    ] {
        if samples.is_empty() {
            continue;
        }
        let images_dir = root.join(name).join("images");
        let masks_dir = root.join(name).join("masks");
        std::fs::create_dir_all(&images_dir)?;
        std::fs::create_dir_all(&masks_dir)?;
        for sample in samples.iter() {
            imageio::save_image(&images_dir.join(format!("{}.pgm", sample.source_id)), &sample.image)?;
            imageio::save_mask(&masks_dir.join(format!("{}.png", sample.source_id)), &sample.mask)?;
        }
    }
    Ok(())
}

/// Per-split statistics (image count, sources, skyrmion pixel fraction,
/// 8-connected instance count).
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct SplitStats {
    pub images: usize,
    pub sources: usize,
    pub skyrmion_pixel_fraction: f64,
    pub skyrmion_instances: usize,
}

#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct SplitSummary {
    pub train: SplitStats,
    pub val: SplitStats,
    pub test: SplitStats,
}

fn split_stats(samples: &[Sample]) -> SplitStats {
    if samples.is_empty() {
        return SplitStats::default();
    }
    let mut sources = BTreeMap::new();
    let mut skyrmion_pixels = 0usize;
    let mut total_pixels = 0usize;
    let mut instances = 0usize;
    for s in samples {
        *sources.entry(s.source_id.clone()).or_insert(0usize) += 1;
        skyrmion_pixels += s.mask.data().iter().filter(|&&v| v == CLASS_SKYRMION).count();
        total_pixels += s.mask.len();
        instances += connected_components(&s.mask, CLASS_SKYRMION, Connectivity::Eight)
            .map(|c| c.len())
            .unwrap_or(0);
    }
    SplitStats {
        images: samples.len(),
        sources: sources.len(),
        skyrmion_pixel_fraction: skyrmion_pixels as f64 / total_pixels as f64,
        skyrmion_instances: instances,
    }
}

pub fn split_summary(dataset: &LabeledDataset) -> SplitSummary {
    SplitSummary {
        train: split_stats(&dataset.train),
        val: split_stats(&dataset.val),
        test: split_stats(&dataset.test),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(h: usize, w: usize, skyrmions: &[(usize, usize)], id: &str) -> Sample {
        let image = GreyImage::filled(h, w, 0.7).unwrap();
        let mut mask = ClassMask::zeros(h, w).unwrap();
        for &(y, x) in skyrmions {
            mask.set(y, x, 1);
        }
        Sample::new(image, mask, id).unwrap()
    }

    #[test]
    fn dims_must_match() {
        let image = GreyImage::zeros(4, 4).unwrap();
        let mask = ClassMask::zeros(4, 5).unwrap();
        assert!(Sample::new(image, mask, "x").is_err());
    }

    #[test]
    fn summary_counts_fraction_and_instances() {
        // One 10-pixel skyrmion in a 100-pixel image.
        let blob: Vec<(usize, usize)> = (0..10).map(|i| (3 + i / 5, 2 + i % 5)).collect();
        let ds = LabeledDataset {
            train: vec![sample(10, 10, &blob, "a")],
            val: vec![],
            test: vec![],
            num_classes: 2,
        };
        let summary = split_summary(&ds);
        assert_eq!(summary.train.images, 1);
        assert!((summary.train.skyrmion_pixel_fraction - 0.10).abs() < 1e-12);
        assert_eq!(summary.train.skyrmion_instances, 1);
        assert_eq!(summary.val.images, 0);
        assert_eq!(summary.val.skyrmion_pixel_fraction, 0.0);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = sample(6, 8, &[(1, 1), (1, 2), (4, 5)], "sample-000");
        s.image.quantize_8bit();
        let ds = LabeledDataset {
            train: vec![s.clone()],
            val: vec![s.clone()],
            test: vec![],
            num_classes: 2,
        };
        save_dataset(dir.path(), &ds).unwrap();
        let back = load_dataset(dir.path(), 2).unwrap();
        assert_eq!(back.train.len(), 1);
        assert_eq!(back.val.len(), 1);
        assert_eq!(back.test.len(), 0);
        assert_eq!(back.train[0].image, s.image);
        assert_eq!(back.train[0].mask, s.mask);
        assert_eq!(back.train[0].source_id, "sample-000");
    }

    #[test]
    fn missing_mask_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("train/images");
        std::fs::create_dir_all(&images).unwrap();
        std::fs::create_dir_all(dir.path().join("train/masks")).unwrap();
        imageio::save_image(&images.join("orphan.pgm"), &GreyImage::zeros(4, 4).unwrap()).unwrap();
        assert!(matches!(
            load_dataset(dir.path(), 2),
            Err(Error::Data(_))
        ));
    }
}
