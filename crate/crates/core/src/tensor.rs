//! Raster and landmark value types.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SbiError};

/// Height x width x 3 raster of unit-interval intensities, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width * Self::CHANNELS {
            return Err(SbiError::InvalidRaster(format!(
                "expected {} values for {height}x{width}x3, got {}",
                height * width * Self::CHANNELS,
                data.len()
            )));
        }
        check_unit(&data)?;
        Ok(ImageTensor {
            height,
            width,
            data,
        })
    }

    /// Builds from data the caller has already clamped to `[0, 1]`.
    pub(crate) fn from_clamped(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * 3);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        ImageTensor {
            height,
            width,
            data,
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width * 3])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, data)
    }

    /// 8-bit RGB in, `v / 255` per channel.
    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != height * width * 3 {
            return Err(SbiError::InvalidRaster(format!(
                "expected {} bytes for {height}x{width} RGB, got {}",
                height * width * 3,
                bytes.len()
            )));
        }
        check_dims(height, width)?;
        Ok(Self::from_clamped(
            height,
            width,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        ))
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * 3 + c]
    }

    /// SHA-256 over the dimensions and the IEEE bits of every intensity.
    pub fn content_digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.height as u64).to_le_bytes());
        h.update((self.width as u64).to_le_bytes());
        for v in &self.data {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Single-channel blending weights in `[0, ratio]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendMask {
    height: usize,
    width: usize,
    data: Vec<f64>,
    ratio: f64,
}

impl BlendMask {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width {
            return Err(SbiError::InvalidRaster(format!(
                "expected {} mask values for {height}x{width}, got {}",
                height * width,
                data.len()
            )));
        }
        check_unit(&data)?;
        Ok(BlendMask {
            height,
            width,
            data,
            ratio: 1.0,
        })
    }

    pub(crate) fn from_clamped(height: usize, width: usize, data: Vec<f64>, ratio: f64) -> Self {
        debug_assert_eq!(data.len(), height * width);
        BlendMask {
            height,
            width,
            data,
            ratio,
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// The ratio last applied by [`crate::mg::apply_blend_ratio`]; 1 if none.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Number of strictly positive pixels.
    pub fn support_area(&self) -> usize {
        self.data.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Ordered facial keypoints in the pixel frame of the paired image.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmarks {
    points: Vec<Point>,
}

impl Landmarks {
    pub const DEFAULT_COUNT: usize = 81;

    pub fn new(points: Vec<Point>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(SbiError::Validation(format!(
                "landmark coordinates must be finite, got ({}, {})",
                p.x, p.y
            )));
        }
        Ok(Landmarks { points })
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        Self::new(pairs.iter().map(|&[x, y]| Point::new(x, y)).collect())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounds as `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> Option<(f64, f64, f64, f64)> {
        let first = self.points.first()?;
        Some(self.points.iter().fold(
            (first.x, first.y, first.x, first.y),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        ))
    }

    /// Same points shifted by `(-dx, -dy)`, i.e. re-expressed in a frame whose origin is `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Landmarks {
        Landmarks {
            points: self
                .points
                .iter()
                .map(|p| Point::new(p.x - dx, p.y - dy))
                .collect(),
        }
    }
}

/// Unit interval to 8-bit, round half away from zero, clamped.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(SbiError::InvalidRaster(format!(
            "dimensions must be at least 1x1, got {height}x{width}"
        )));
    }
    Ok(())
}

fn check_unit(data: &[f64]) -> Result<()> {
    if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(SbiError::InvalidRaster(format!(
            "intensity {v} outside [0, 1]"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_round_trip_is_identity() {
        let bytes: Vec<u8> = (0..=255u8).flat_map(|v| [v, v, v]).collect();
        let img = ImageTensor::from_rgb8(1, 256, &bytes).unwrap();
        assert_eq!(img.to_rgb8(), bytes);
    }

    #[test]
    fn rejects_out_of_range_and_bad_length() {
        assert!(ImageTensor::new(1, 1, vec![0.0, 1.5, 0.0]).is_err());
        assert!(ImageTensor::new(1, 1, vec![0.0, 0.5]).is_err());
        assert!(ImageTensor::new(0, 1, vec![]).is_err());
        assert!(BlendMask::new(2, 2, vec![0.0; 3]).is_err());
        assert!(BlendMask::new(1, 1, vec![-0.1]).is_err());
    }

    #[test]
    fn landmarks_reject_non_finite() {
        assert!(Landmarks::from_pairs(&[[0.0, f64::NAN]]).is_err());
        let l = Landmarks::from_pairs(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        assert_eq!(l.bounds(), Some((1.0, -1.0, 3.0, 2.0)));
        assert_eq!(l.translated(1.0, 1.0).points()[0], Point::new(0.0, 1.0));
    }

    #[test]
    fn digest_depends_on_content() {
        let a = ImageTensor::filled(2, 2, 0.5).unwrap();
        let b = ImageTensor::filled(2, 2, 0.25).unwrap();
        assert_eq!(a.content_digest(), a.clone().content_digest());
        assert_ne!(a.content_digest(), b.content_digest());
    }

    #[test]
    fn quantize_ratio_levels() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.25), 64);
        assert_eq!(quantize(0.75), 191);
        assert_eq!(quantize(1.0), 255);
    }
}
