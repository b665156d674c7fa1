//! Minimal raster rendering of the report charts (bars and polylines on a
//! fixed canvas; no interactivity).

use std::path::Path;

use image::{Rgb, RgbImage};
use skyrm_core::error::{Error, Result};

const WIDTH: u32 = 720;
const HEIGHT: u32 = 440;
const MARGIN: u32 = 50;

const BG: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([30, 30, 30]);
const SERIES: [Rgb<u8>; 3] = [
    Rgb([60, 100, 200]),
    Rgb([200, 90, 60]),
    Rgb([60, 170, 90]),
];

fn blank() -> RgbImage {
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, BG);
    // Axis lines.
    for x in MARGIN..WIDTH - MARGIN {
        img.put_pixel(x, HEIGHT - MARGIN, AXIS);
    }
    for y in MARGIN..=HEIGHT - MARGIN {
        img.put_pixel(MARGIN, y, AXIS);
    }
    img
}

fn plot_area() -> (f64, f64, f64, f64) {
    (
        MARGIN as f64,
        (WIDTH - MARGIN) as f64,
        MARGIN as f64,
        (HEIGHT - MARGIN) as f64,
    )
}

fn vline(img: &mut RgbImage, x: u32, y0: u32, y1: u32, colour: Rgb<u8>) {
    for y in y0.min(y1)..=y0.max(y1) {
        if x < WIDTH && y < HEIGHT {
            img.put_pixel(x, y, colour);
        }
    }
}

fn line(img: &mut RgbImage, x0: f64, y0: f64, x1: f64, y1: f64, colour: Rgb<u8>) {
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = (x0 + t * (x1 - x0)).round() as i64;
        let y = (y0 + t * (y1 - y0)).round() as i64;
        if (0..WIDTH as i64).contains(&x) && (0..HEIGHT as i64).contains(&y) {
            img.put_pixel(x as u32, y as u32, colour);
        }
    }
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty CSV", path.display())))?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|_| {
            Error::Data(format!("{}:{}: non-numeric row", path.display(), i + 2))
        })?);
    }
    Ok((header, rows))
}

/// Bar chart from a `bin_lo,bin_hi,count` CSV.
pub fn histogram_png(csv: &Path, out: &Path, _title: &str) -> Result<()> {
    let (_, rows) = read_csv(csv)?;
    let mut img = blank();
    let (x0, x1, y0, y1) = plot_area();
    let max_edge = rows.last().map(|r| r[1]).unwrap_or(1.0).max(1.0);
    let max_count = rows
        .iter()
        .map(|r| r[2])
        .fold(1.0f64, f64::max);
    for row in &rows {
        let (lo, hi, count) = (row[0], row[1], row[2]);
        if count <= 0.0 {
            continue;
        }
        let px0 = x0 + (lo / max_edge) * (x1 - x0);
        let px1 = x0 + (hi / max_edge) * (x1 - x0);
        let top = y1 - (count / max_count) * (y1 - y0);
        for x in px0.round() as u32..=(px1.round() as u32).min(WIDTH - 1) {
            vline(&mut img, x, top.round() as u32, y1 as u32 - 1, SERIES[0]);
        }
    }
    img.save(out)
        .map_err(|e| Error::Data(format!("{}: cannot write PNG: {e}", out.display())))?;
    Ok(())
}

/// Per-class fraction curves from a probe CSV
/// (`level,dominant_class,frac_class0,...`).
pub fn probe_png(csv: &Path, out: &Path) -> Result<()> {
    let (header, rows) = read_csv(csv)?;
    let n_classes = header.len().saturating_sub(2);
    if n_classes == 0 || rows.is_empty() {
        return Err(Error::Data(format!("{}: not a probe CSV", csv.display())));
    }
    let mut img = blank();
    let (x0, x1, y0, y1) = plot_area();
    for c in 0..n_classes {
        let colour = SERIES[c % SERIES.len()];
        for pair in rows.windows(2) {
            let (la, fa) = (pair[0][0], pair[0][2 + c]);
            let (lb, fb) = (pair[1][0], pair[1][2 + c]);
            let ax = x0 + (la / 255.0) * (x1 - x0);
            let bx = x0 + (lb / 255.0) * (x1 - x0);
            let ay = y1 - fa * (y1 - y0);
            let by = y1 - fb * (y1 - y0);
            line(&mut img, ax, ay, bx, by, colour);
        }
    }
    img.save(out)
        .map_err(|e| Error::Data(format!("{}: cannot write PNG: {e}", out.display())))?;
    Ok(())
}
