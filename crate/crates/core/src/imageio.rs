//! Greyscale image and mask file I/O: binary PGM (P5, maxval 255) and 8-bit
//! greyscale PNG.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grey::GreyImage;
use crate::mask::{ClassMask, CLASS_DEFECT};

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Raw 8-bit greyscale pixels of a PGM or PNG file.
fn load_grey_u8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" => {
            let bytes = std::fs::read(path)?;
            parse_pgm(&bytes).map_err(|msg| format_err(path, msg))
        }
        "png" => {
            let img = image::open(path)
                .map_err(|e| format_err(path, format!("cannot decode PNG: {e}")))?;
            match img {
                image::DynamicImage::ImageLuma8(buf) => {
                    let (w, h) = buf.dimensions();
                    Ok((h as usize, w as usize, buf.into_raw()))
                }
                other => Err(format_err(
                    path,
                    format!(
                        "expected 8-bit greyscale, found {:?} (colour images are not supported)",
                        other.color()
                    ),
                )),
            }
        }
        other => Err(format_err(
            path,
            format!("unsupported format `.{other}` (use .pgm or .png)"),
        )),
    }
}

/// Binary PGM (P5): magic, whitespace-separated width/height/maxval with
/// `#` comments, one whitespace byte, then raw pixels.
fn parse_pgm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<u8>), String> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err("not a binary PGM (P5) file".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Skip whitespace and comment lines.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err("malformed PGM header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| "malformed PGM header".to_string())?;
    }
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(format!("PGM maxval {maxval}, only 255 is supported"));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("malformed PGM header".into());
    }
    pos += 1;
    let expected = w * h;
    if bytes.len() - pos < expected {
        return Err(format!(
            "PGM payload truncated: expected {expected} pixels, found {}",
            bytes.len() - pos
        ));
    }
    Ok((h, w, bytes[pos..pos + expected].to_vec()))
}

/// Load a greyscale image, normalizing v ↦ v/255.
pub fn load_image(path: &Path) -> Result<GreyImage> {
    let (h, w, pixels) = load_grey_u8(path)?;
    if h == 0 || w == 0 {
        return Err(format_err(path, "image has zero size"));
    }
    GreyImage::from_vec(h, w, pixels.iter().map(|&v| v as f32 / 255.0).collect())
}

/// Save a greyscale image as PGM or PNG (by extension), quantizing to 8 bits.
pub fn save_image(path: &Path, img: &GreyImage) -> Result<()> {
    let (h, w) = img.dims();
    let pixels: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" => {
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            out.extend_from_slice(&pixels);
            std::fs::write(path, out)?;
            Ok(())
        }
        "png" => {
            let buf: image::GrayImage =
                image::ImageBuffer::from_raw(w as u32, h as u32, pixels)
                    .expect("buffer fills dimensions");
            buf.save(path)
                .map_err(|e| format_err(path, format!("cannot write PNG: {e}")))
        }
        other => Err(format_err(
            path,
            format!("unsupported format `.{other}` (use .pgm or .png)"),
        )),
    }
}

const MASK_LEVELS: [u8; 3] = [0, 128, 255];

/// Load a class mask from the greyscale encoding 0 → background,
/// 128 → skyrmion, 255 → defect. With `num_classes == 2`, defect pixels
/// fold into background (the 2-class view of a 3-class mask). Any other
/// pixel value is a data error reported with its coordinates.
pub fn load_mask(path: &Path, num_classes: usize) -> Result<ClassMask> {
    let (h, w, pixels) = load_grey_u8(path)?;
    let mut data = Vec::with_capacity(pixels.len());
    for (i, &v) in pixels.iter().enumerate() {
        let class = MASK_LEVELS
            .iter()
            .position(|&lvl| lvl == v)
            .ok_or_else(|| {
                Error::Data(format!(
                    "{}: pixel ({}, {}) has value {v}, expected one of 0/128/255",
                    path.display(),
                    i / w,
                    i % w
                ))
            })? as u8;
        let class = if class == CLASS_DEFECT && num_classes == 2 {
            0
        } else {
            class
        };
        if class as usize >= num_classes {
            return Err(Error::Data(format!(
                "{}: pixel ({}, {}) has class {class} but the dataset has {num_classes} classes",
                path.display(),
                i / w,
                i % w
            )));
        }
        data.push(class);
    }
    ClassMask::from_vec(h, w, data)
}

/// Save a class mask in the 0/128/255 greyscale encoding.
pub fn save_mask(path: &Path, mask: &ClassMask) -> Result<()> {
    let (h, w) = mask.dims();
    let pixels: Vec<u8> = mask
        .data()
        .iter()
        .map(|&c| *MASK_LEVELS.get(c as usize).unwrap_or(&255))
        .collect();
    let buf: image::GrayImage = image::ImageBuffer::from_raw(w as u32, h as u32, pixels)
        .expect("buffer fills dimensions");
    buf.save(path)
        .map_err(|e| format_err(path, format!("cannot write PNG: {e}")))
}
