//! Procedural face-like images with 81 landmarks, for tests, benchmarks and
//! smoke runs without a real face dataset.

use std::f64::consts::TAU;
use std::path::Path;

use image::ExtendedColorType;

use crate::config::PngCompression;
use crate::error::{Result, SbiError};
use crate::ingest::{encode_png, write_manifest, ManifestEntry};
use crate::rng::RngStream;
use crate::tensor::{ImageTensor, Landmarks, Point};

/// Landmark layout of a face ellipse centred at `(cx, cy)` with radii `(rx, ry)`:
/// 40 contour points followed by 41 interior features.
pub fn face_landmarks(cx: f64, cy: f64, rx: f64, ry: f64, wobble: &mut RngStream) -> Vec<Point> {
    let mut pts = Vec::with_capacity(81);
    for i in 0..40 {
        let t = i as f64 / 40.0 * TAU;
        let j = 1.0 + 0.03 * (wobble.next_unit() - 0.5);
        pts.push(Point::new(cx + rx * j * t.cos(), cy + ry * j * t.sin()));
    }
    // eyes, brows, nose, mouth as small rings and lines
    let ring = |pts: &mut Vec<Point>, x: f64, y: f64, r: f64, n: usize| {
        for i in 0..n {
            let t = i as f64 / n as f64 * TAU;
            pts.push(Point::new(x + r * t.cos(), y + 0.5 * r * t.sin()));
        }
    };
    ring(&mut pts, cx - 0.4 * rx, cy - 0.2 * ry, 0.18 * rx, 6);
    ring(&mut pts, cx + 0.4 * rx, cy - 0.2 * ry, 0.18 * rx, 6);
    for i in 0..5 {
        let f = i as f64 / 4.0 - 0.5;
        pts.push(Point::new(cx - 0.4 * rx + 0.4 * rx * f, cy - 0.4 * ry));
        pts.push(Point::new(cx + 0.4 * rx + 0.4 * rx * f, cy - 0.4 * ry));
    }
    for i in 0..7 {
        pts.push(Point::new(cx, cy - 0.15 * ry + 0.05 * ry * i as f64));
    }
    ring(&mut pts, cx, cy + 0.5 * ry, 0.3 * rx, 12);
    debug_assert_eq!(pts.len(), 81);
    pts
}

/// A `height x width` face-like image and its 81 landmarks; `variant` selects
/// colours, placement and texture.
pub fn face(height: usize, width: usize, variant: u64) -> (ImageTensor, Landmarks) {
    let mut s = RngStream::new(0x5eed, variant);
    let cx = width as f64 * (0.45 + 0.1 * s.next_unit());
    let cy = height as f64 * (0.45 + 0.1 * s.next_unit());
    let rx = width as f64 * (0.25 + 0.05 * s.next_unit());
    let ry = height as f64 * (0.30 + 0.05 * s.next_unit());
    let skin = [0.55 + 0.35 * s.next_unit(), 0.4 + 0.3 * s.next_unit(), 0.3 + 0.3 * s.next_unit()];
    let bg = [s.next_unit(), s.next_unit(), s.next_unit()];
    let pts = face_landmarks(cx, cy, rx, ry, &mut s);

    let mut noise = RngStream::new(0x7e47, variant);
    let img = ImageTensor::from_fn(height, width, |y, x, c| {
        let (fx, fy) = (x as f64, y as f64);
        let d = ((fx - cx) / rx).powi(2) + ((fy - cy) / ry).powi(2);
        let base = if d <= 1.0 {
            let eye = |ex: f64| ((fx - ex).powi(2) + (fy - (cy - 0.2 * ry)).powi(2)).sqrt() < 0.1 * rx;
            if eye(cx - 0.4 * rx) || eye(cx + 0.4 * rx) {
                0.1
            } else {
                skin[c] * (1.0 - 0.2 * d)
            }
        } else {
            bg[c] * (0.6 + 0.4 * fy / height as f64)
        };
        (base + 0.04 * (noise.next_unit() - 0.5)).clamp(0.0, 1.0)
    })
    .expect("synthetic raster is valid");
    let landmarks = Landmarks::new(pts).expect("synthetic landmarks are finite");
    (img, landmarks)
}

/// Writes `count` face images of `size x size` plus `manifest.jsonl` into `dir`.
/// Entries listed in `collinear` get all 81 landmarks on one line, exactly
/// representable so the degeneracy is not lost to rounding.
pub fn write_dataset(dir: impl AsRef<Path>, count: usize, size: usize, collinear: &[usize]) -> Result<std::path::PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| crate::error::SbiError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let (img, lms) = face(size, size, i as u64);
        let name = format!("face_{i:05}.png");
        let bytes = encode_png(&img.to_rgb8(), size, size, ExtendedColorType::Rgb8, PngCompression::Fast)?;
        let path = dir.join(&name);
        std::fs::write(&path, bytes).map_err(|e| SbiError::Io { path, source: e })?;
        let (x0, y0, x1, y1) = lms.bounds().expect("81 landmarks");
        let landmarks = if collinear.contains(&i) {
            (0..81).map(|k| [x0.floor() + k as f64 * 0.25, y0.floor() + k as f64 * 0.25]).collect()
        } else {
            lms.points().iter().map(|p| [p.x, p.y]).collect()
        };
        entries.push(ManifestEntry {
            image: name,
            bbox: [x0, y0, x1, y1],
            landmarks,
            video_id: Some(format!("v{:03}", i / 4)),
            frame_index: Some((i % 4) as u64),
        });
    }
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}
