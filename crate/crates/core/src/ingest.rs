//! Dataset ingestion and emission.
//!
//! # Manifest format
//!
//! A manifest is UTF-8 JSON Lines, one face per line. Blank lines and lines
//! starting with `#` are ignored. An optional first record
//! `{"sbi_manifest": 1}` declares the schema version. Each entry is
//!
//! ```json
//! {"image": "frames/v01_0003.png", "bbox": [x0, y0, x1, y1],
//!  "landmarks": [[x, y], ...], "video_id": "v01", "frame_index": 3}
//! ```
//!
//! `image` is resolved relative to the manifest's directory. `bbox` and
//! `landmarks` are in source-image pixels; `video_id` and `frame_index` are
//! optional.
//!
//! # Output layout
//!
//! For entry key `K` and sample index `S`, [`write_sample`] writes
//! `K_S_real.png`, `K_S_fake.png` (8-bit RGB), `K_S_mask.png` (8-bit gray)
//! and `K_S_recipe.json`, and appends one line per file to `index.tsv`:
//! `<relative path>\t<sha256 hex>\t<byte size>`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CropConfig, MarginMode, PngCompression};
use crate::error::{Result, SbiError};
use crate::pipeline::SbiSample;
use crate::rng::RngStream;
use crate::tensor::{ImageTensor, Landmarks};

pub const MANIFEST_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.tsv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image: String,
    pub bbox: [f64; 4],
    pub landmarks: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<u64>,
}

impl ManifestEntry {
    pub fn validate(&self, expected_landmarks: usize) -> std::result::Result<(), String> {
        let [x0, y0, x1, y1] = self.bbox;
        if !self.bbox.iter().all(|v| v.is_finite()) {
            return Err("bbox coordinates must be finite".into());
        }
        if !(x0 < x1 && y0 < y1) {
            return Err(format!("bbox [{x0}, {y0}, {x1}, {y1}] is inverted or empty"));
        }
        if self.landmarks.len() != expected_landmarks {
            return Err(format!(
                "landmark count: expected {expected_landmarks}, got {}",
                self.landmarks.len()
            ));
        }
        if self.landmarks.iter().flatten().any(|v| !v.is_finite()) {
            return Err("landmark coordinates must be finite".into());
        }
        Ok(())
    }

    pub fn landmarks(&self) -> Result<Landmarks> {
        Landmarks::from_pairs(&self.landmarks)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory that relative image paths resolve against.
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn image_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.image)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestHeader {
    sbi_manifest: u32,
}

/// Parses and validates a manifest; errors carry the 1-based line number.
pub fn parse_manifest(path: impl AsRef<Path>, expected_landmarks: usize) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SbiError::io(path, e))?;
    let entries = parse_manifest_str(&text, expected_landmarks).map_err(|(line, message)| {
        SbiError::Manifest {
            path: path.to_path_buf(),
            line,
            message,
        }
    })?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Manifest { base_dir, entries })
}

fn parse_manifest_str(
    text: &str,
    expected_landmarks: usize,
) -> std::result::Result<Vec<ManifestEntry>, (usize, String)> {
    let mut entries = Vec::new();
    let mut seen_record = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| (line_no, format!("malformed record: {e}")))?;
        if value.get("sbi_manifest").is_some() {
            if seen_record {
                return Err((line_no, "manifest header must be the first record".into()));
            }
            let header: ManifestHeader = serde_json::from_value(value)
                .map_err(|e| (line_no, format!("malformed header: {e}")))?;
            if header.sbi_manifest != MANIFEST_VERSION {
                return Err((
                    line_no,
                    format!(
                        "unsupported manifest version {} (expected {MANIFEST_VERSION})",
                        header.sbi_manifest
                    ),
                ));
            }
            seen_record = true;
            continue;
        }
        seen_record = true;
        let entry: ManifestEntry =
            serde_json::from_value(value).map_err(|e| (line_no, format!("malformed entry: {e}")))?;
        entry.validate(expected_landmarks).map_err(|m| (line_no, m))?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Writes a header line followed by one JSON record per entry.
pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("{{\"sbi_manifest\":{MANIFEST_VERSION}}}\n");
    for e in entries {
        out.push_str(&serde_json::to_string(e).map_err(|e| SbiError::Serde(e.to_string()))?);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| SbiError::io(path, e))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|source| SbiError::Codec {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    ImageTensor::from_rgb8(h as usize, w as usize, img.as_raw())
}

/// End-exclusive pixel rectangle in the source image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CropRect {
    pub fn as_array(&self) -> [usize; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    pub fn from_array([x0, y0, x1, y1]: [usize; 4]) -> Self {
        CropRect { x0, y0, x1, y1 }
    }

    /// Re-expresses landmarks in crop coordinates.
    pub fn to_crop_frame(&self, landmarks: &Landmarks) -> Landmarks {
        landmarks.translated(self.x0 as f64, self.y0 as f64)
    }
}

/// Grows the face box by `margin` of the face width/height, rounds outward,
/// clips to the image and crops.
pub fn crop_face(
    img: &ImageTensor,
    bbox: [f64; 4],
    margin: f64,
    mode: MarginMode,
) -> Result<(ImageTensor, CropRect)> {
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(SbiError::Parameter(format!("crop margin {margin} must be >= 0")));
    }
    let [x0, y0, x1, y1] = bbox;
    let (fw, fh) = (x1 - x0, y1 - y0);
    let per_side = match mode {
        MarginMode::PerSide => margin,
        MarginMode::Total => margin / 2.0,
    };
    let (ex, ey) = (per_side * fw, per_side * fh);
    let (w, h) = (img.width() as f64, img.height() as f64);
    let left = (x0 - ex).floor().clamp(0.0, w);
    let right = (x1 + ex).ceil().clamp(0.0, w);
    let top = (y0 - ey).floor().clamp(0.0, h);
    let bottom = (y1 + ey).ceil().clamp(0.0, h);
    if !(left < right && top < bottom) {
        return Err(SbiError::Validation(format!(
            "bbox [{x0}, {y0}, {x1}, {y1}] lies outside the {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let rect = CropRect {
        x0: left as usize,
        y0: top as usize,
        x1: right as usize,
        y1: bottom as usize,
    };
    Ok((crop_rect(img, rect)?, rect))
}

pub fn crop_rect(img: &ImageTensor, rect: CropRect) -> Result<ImageTensor> {
    if rect.x0 >= rect.x1 || rect.y0 >= rect.y1 || rect.x1 > img.width() || rect.y1 > img.height() {
        return Err(SbiError::Validation(format!(
            "crop {:?} does not fit the {}x{} image",
            rect.as_array(),
            img.width(),
            img.height()
        )));
    }
    let w = img.width();
    let mut data = Vec::with_capacity((rect.y1 - rect.y0) * (rect.x1 - rect.x0) * 3);
    for y in rect.y0..rect.y1 {
        data.extend_from_slice(&img.data()[(y * w + rect.x0) * 3..(y * w + rect.x1) * 3]);
    }
    ImageTensor::new(rect.y1 - rect.y0, rect.x1 - rect.x0, data)
}

/// Whether crops use a random training margin or the fixed inference margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropMode {
    Train,
    Inference,
}

/// Uniform in the training range, constant in inference mode.
pub fn sample_margin(stream: &mut RngStream, mode: CropMode, cfg: &CropConfig) -> Result<f64> {
    match mode {
        CropMode::Train => cfg.train_margin.sample(stream),
        CropMode::Inference => Ok(cfg.inference_margin),
    }
}

/// One line of the batch index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexLine {
    pub path: String,
    pub digest: String,
    pub size: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Append-only batch index writer; lines are `path\tsha256\tsize`.
pub struct BatchIndexWriter {
    out: BufWriter<File>,
    path: PathBuf,
    lines: usize,
}

impl BatchIndexWriter {
    pub fn create(out_dir: impl AsRef<Path>) -> Result<Self> {
        let path = out_dir.as_ref().join(INDEX_FILE);
        let file = File::create(&path).map_err(|e| SbiError::io(&path, e))?;
        Ok(BatchIndexWriter {
            out: BufWriter::new(file),
            path,
            lines: 0,
        })
    }

    pub fn append(&mut self, rel_path: &str, bytes: &[u8]) -> Result<()> {
        writeln!(self.out, "{rel_path}\t{}\t{}", sha256_hex(bytes), bytes.len())
            .map_err(|e| SbiError::io(&self.path, e))?;
        self.lines += 1;
        Ok(())
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush().map_err(|e| SbiError::io(&self.path, e))?;
        Ok(self.path)
    }
}

pub fn read_index(path: impl AsRef<Path>) -> Result<Vec<IndexLine>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SbiError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = |m: &str| SbiError::Manifest {
                path: path.to_path_buf(),
                line: i + 1,
                message: m.to_string(),
            };
            let mut parts = l.split('\t');
            let (Some(p), Some(d), Some(s), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected three tab-separated fields"));
            };
            let size = s.parse().map_err(|_| bad("size is not an integer"))?;
            Ok(IndexLine {
                path: p.to_string(),
                digest: d.to_string(),
                size,
            })
        })
        .collect()
}

pub fn encode_png(bytes: &[u8], width: usize, height: usize, color: ExtendedColorType, compression: PngCompression) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let compression = match compression {
        PngCompression::Fast => CompressionType::Fast,
        PngCompression::Default => CompressionType::Default,
        PngCompression::Best => CompressionType::Best,
    };
    PngEncoder::new_with_quality(&mut buf, compression, FilterType::Adaptive)
        .write_image(bytes, width as u32, height as u32, color)
        .map_err(|source| SbiError::Codec {
            path: PathBuf::from("<png>"),
            source,
        })?;
    Ok(buf)
}

/// Paths written for one sample, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePaths {
    pub real: String,
    pub fake: String,
    pub mask: String,
    pub recipe: String,
}

impl SamplePaths {
    pub fn new(entry_key: &str, sample_index: u64) -> Self {
        let stem = format!("{entry_key}_{sample_index}");
        SamplePaths {
            real: format!("{stem}_real.png"),
            fake: format!("{stem}_fake.png"),
            mask: format!("{stem}_mask.png"),
            recipe: format!("{stem}_recipe.json"),
        }
    }
}

/// Zero-padded entry index used as the file stem.
pub fn entry_key(entry_index: u64) -> String {
    format!("{entry_index:06}")
}

/// Writes the four artifacts of one sample and records them in the index.
pub fn write_sample(
    sample: &SbiSample,
    out_dir: impl AsRef<Path>,
    entry_key: &str,
    compression: PngCompression,
    index: &mut BatchIndexWriter,
) -> Result<SamplePaths> {
    let out_dir = out_dir.as_ref();
    let paths = SamplePaths::new(entry_key, sample.recipe.key.sample_index);
    let (h, w) = sample.real_image.dims();
    let artifacts = [
        (&paths.real, encode_png(&sample.real_image.to_rgb8(), w, h, ExtendedColorType::Rgb8, compression)?),
        (&paths.fake, encode_png(&sample.fake_image.to_rgb8(), w, h, ExtendedColorType::Rgb8, compression)?),
        (&paths.mask, encode_png(&sample.mask.to_gray8(), w, h, ExtendedColorType::L8, compression)?),
        (&paths.recipe, sample.recipe.to_json()?.into_bytes()),
    ];
    for (rel, bytes) in &artifacts {
        let full = out_dir.join(rel);
        std::fs::write(&full, bytes).map_err(|e| SbiError::io(&full, e))?;
        index.append(rel, bytes)?;
    }
    Ok(paths)
}

/// Decoded 8-bit planes of a written image.
pub fn read_png_bytes(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>, bool)> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| SbiError::Codec {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = matches!(img.color(), image::ColorType::L8);
    let bytes = if gray {
        img.into_luma8().into_raw()
    } else {
        img.into_rgb8().into_raw()
    };
    Ok((h, w, bytes, gray))
}
