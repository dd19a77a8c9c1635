//! Pipeline configuration: a versioned TOML document.
//!
//! Every key is optional and falls back to the default below; unknown keys
//! are rejected. Ranges are written as two-element arrays `[lo, hi]`.
//!
//! ```toml
//! schema_version = 1
//! landmark_count = 81
//!
//! [stg]
//! apply_probability = 0.5
//! rgb_shift = [-0.0784313725490196, 0.0784313725490196]
//! hue_shift_deg = [-10.0, 10.0]
//! saturation_scale = [0.7, 1.3]
//! value_scale = [0.7, 1.3]
//! brightness_shift = [-0.1, 0.1]
//! contrast_scale = [0.85, 1.15]
//! downscale_factor = [0.5, 0.95]
//! sharpen_alpha = [0.2, 0.5]
//! sharpen_sigma = 1.0
//! scale = [0.95, 1.05]
//! translate = [-0.03, 0.03]
//!
//! [mask]
//! landmark_jitter = 0.03
//! elastic_alpha = [0.0, 6.0]
//! elastic_sigma = [4.0, 8.0]
//! kernel_fraction = [0.05, 0.25]
//! ratio_choices = [0.25, 0.5, 0.75, 1.0, 1.0, 1.0]
//!
//! [crop]
//! train_margin = [0.04, 0.2]
//! inference_margin = 0.125
//! margin_mode = "per_side"
//!
//! [output]
//! png_compression = "default"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SbiError};
use crate::rng::RngStream;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Closed sampling range, serialised as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval(pub f64, pub f64);

impl Interval {
    pub const fn point(v: f64) -> Self {
        Interval(v, v)
    }

    pub fn lo(&self) -> f64 {
        self.0
    }

    pub fn hi(&self) -> f64 {
        self.1
    }

    pub fn width(&self) -> f64 {
        self.1 - self.0
    }

    pub fn contains(&self, v: f64) -> bool {
        self.0 <= v && v <= self.1
    }

    pub fn sample(&self, stream: &mut RngStream) -> Result<f64> {
        stream.draw_uniform(self.0, self.1)
    }

    fn check(&self, name: &str, floor: Option<f64>, ceil: Option<f64>) -> Result<()> {
        if !(self.0.is_finite() && self.1.is_finite()) {
            return Err(SbiError::Config(format!("{name}: bounds must be finite")));
        }
        if self.0 > self.1 {
            return Err(SbiError::Config(format!(
                "{name}: range [{}, {}] is not ordered",
                self.0, self.1
            )));
        }
        if let Some(f) = floor {
            if self.0 < f {
                return Err(SbiError::Config(format!("{name}: lower bound {} < {f}", self.0)));
            }
        }
        if let Some(c) = ceil {
            if self.1 > c {
                return Err(SbiError::Config(format!("{name}: upper bound {} > {c}", self.1)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StgConfig {
    /// Probability that each colour sub-transform and the frequency transform fires.
    pub apply_probability: f64,
    pub rgb_shift: Interval,
    pub hue_shift_deg: Interval,
    pub saturation_scale: Interval,
    pub value_scale: Interval,
    pub brightness_shift: Interval,
    pub contrast_scale: Interval,
    pub downscale_factor: Interval,
    pub sharpen_alpha: Interval,
    pub sharpen_sigma: f64,
    /// Resize factors `u_h`, `u_w`.
    pub scale: Interval,
    /// Translation fractions `v_h`, `v_w`.
    pub translate: Interval,
}

impl Default for StgConfig {
    fn default() -> Self {
        StgConfig {
            apply_probability: 0.5,
            rgb_shift: Interval(-20.0 / 255.0, 20.0 / 255.0),
            hue_shift_deg: Interval(-10.0, 10.0),
            saturation_scale: Interval(0.7, 1.3),
            value_scale: Interval(0.7, 1.3),
            brightness_shift: Interval(-0.1, 0.1),
            contrast_scale: Interval(0.85, 1.15),
            downscale_factor: Interval(0.5, 0.95),
            sharpen_alpha: Interval(0.2, 0.5),
            sharpen_sigma: 1.0,
            scale: Interval(0.95, 1.05),
            translate: Interval(-0.03, 0.03),
        }
    }
}

impl StgConfig {
    pub fn identity() -> Self {
        StgConfig {
            apply_probability: 0.5,
            rgb_shift: Interval::point(0.0),
            hue_shift_deg: Interval::point(0.0),
            saturation_scale: Interval::point(1.0),
            value_scale: Interval::point(1.0),
            brightness_shift: Interval::point(0.0),
            contrast_scale: Interval::point(1.0),
            downscale_factor: Interval::point(1.0),
            sharpen_alpha: Interval::point(0.0),
            sharpen_sigma: 1.0,
            scale: Interval::point(1.0),
            translate: Interval::point(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.apply_probability) {
            return Err(SbiError::Config(format!(
                "stg.apply_probability {} outside [0, 1]",
                self.apply_probability
            )));
        }
        self.rgb_shift.check("stg.rgb_shift", Some(-1.0), Some(1.0))?;
        self.hue_shift_deg.check("stg.hue_shift_deg", Some(-180.0), Some(180.0))?;
        self.saturation_scale.check("stg.saturation_scale", Some(0.0), None)?;
        self.value_scale.check("stg.value_scale", Some(0.0), None)?;
        self.brightness_shift.check("stg.brightness_shift", Some(-1.0), Some(1.0))?;
        self.contrast_scale.check("stg.contrast_scale", Some(0.0), None)?;
        self.downscale_factor.check("stg.downscale_factor", None, Some(1.0))?;
        if self.downscale_factor.lo() <= 0.0 {
            return Err(SbiError::Config("stg.downscale_factor must be > 0".into()));
        }
        self.sharpen_alpha.check("stg.sharpen_alpha", Some(0.0), Some(1.0))?;
        if !(self.sharpen_sigma.is_finite() && self.sharpen_sigma > 0.0) {
            return Err(SbiError::Config("stg.sharpen_sigma must be > 0".into()));
        }
        self.scale.check("stg.scale", None, None)?;
        if self.scale.lo() <= 0.0 {
            return Err(SbiError::Config("stg.scale must be > 0".into()));
        }
        self.translate.check("stg.translate", Some(-1.0), Some(1.0))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    /// Per-point offset bound as a fraction of the landmark bounding-box diagonal.
    pub landmark_jitter: f64,
    /// Maximum elastic displacement in pixels.
    pub elastic_alpha: Interval,
    /// Smoothing width of the elastic displacement field in pixels.
    pub elastic_sigma: Interval,
    /// Gaussian kernel size as a fraction of the longer hull bounding-box side.
    pub kernel_fraction: Interval,
    pub ratio_choices: Vec<f64>,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            landmark_jitter: 0.03,
            elastic_alpha: Interval(0.0, 6.0),
            elastic_sigma: Interval(4.0, 8.0),
            kernel_fraction: Interval(0.05, 0.25),
            ratio_choices: vec![0.25, 0.5, 0.75, 1.0, 1.0, 1.0],
        }
    }
}

impl MaskConfig {
    pub fn identity() -> Self {
        MaskConfig {
            landmark_jitter: 0.0,
            elastic_alpha: Interval::point(0.0),
            elastic_sigma: Interval::point(4.0),
            kernel_fraction: Interval::point(0.0),
            ratio_choices: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.landmark_jitter.is_finite() && self.landmark_jitter >= 0.0) {
            return Err(SbiError::Config("mask.landmark_jitter must be >= 0".into()));
        }
        self.elastic_alpha.check("mask.elastic_alpha", Some(0.0), None)?;
        self.elastic_sigma.check("mask.elastic_sigma", None, None)?;
        if self.elastic_sigma.lo() <= 0.0 {
            return Err(SbiError::Config("mask.elastic_sigma must be > 0".into()));
        }
        self.kernel_fraction.check("mask.kernel_fraction", Some(0.0), None)?;
        if self.ratio_choices.is_empty() {
            return Err(SbiError::Config("mask.ratio_choices must not be empty".into()));
        }
        if let Some(r) = self.ratio_choices.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(SbiError::Config(format!("mask.ratio_choices: {r} outside (0, 1]")));
        }
        Ok(())
    }
}

/// How a crop margin extends the face box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMode {
    /// Each side grows by `margin x` face width (or height).
    PerSide,
    /// The box grows by `margin x` face width (or height) in total, split evenly.
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropConfig {
    pub train_margin: Interval,
    pub inference_margin: f64,
    pub margin_mode: MarginMode,
}

impl Default for CropConfig {
    fn default() -> Self {
        CropConfig {
            train_margin: Interval(0.04, 0.20),
            inference_margin: 0.125,
            margin_mode: MarginMode::PerSide,
        }
    }
}

impl CropConfig {
    pub fn validate(&self) -> Result<()> {
        self.train_margin.check("crop.train_margin", Some(0.0), None)?;
        if !(self.inference_margin.is_finite() && self.inference_margin >= 0.0) {
            return Err(SbiError::Config("crop.inference_margin must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PngCompression {
    Fast,
    Default,
    Best,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub png_compression: PngCompression,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            png_compression: PngCompression::Default,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    /// Expected landmarks per manifest entry.
    pub landmark_count: usize,
    pub stg: StgConfig,
    pub mask: MaskConfig,
    pub crop: CropConfig,
    pub output: OutputConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            landmark_count: 81,
            stg: StgConfig::default(),
            mask: MaskConfig::default(),
            crop: CropConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Every sampled transform collapsed to its identity and `r = 1`.
    pub fn identity() -> Self {
        PipelineConfig {
            stg: StgConfig::identity(),
            mask: MaskConfig::identity(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(SbiError::Config(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.landmark_count < 3 {
            return Err(SbiError::Config(format!(
                "landmark_count {} < 3",
                self.landmark_count
            )));
        }
        self.stg.validate()?;
        self.mask.validate()?;
        self.crop.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| SbiError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SbiError::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| SbiError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SbiError::Serde(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), cfg);
        PipelineConfig::identity().validate().unwrap();
    }

    #[test]
    fn partial_document_uses_defaults() {
        let cfg = PipelineConfig::from_toml_str(
            "schema_version = 1\n[mask]\nratio_choices = [0.5]\n",
        )
        .unwrap();
        assert_eq!(cfg.mask.ratio_choices, vec![0.5]);
        assert_eq!(cfg.stg, StgConfig::default());
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = PipelineConfig::from_toml_str("[stg]\nrgb_shfit = [0.0, 0.1]\n").unwrap_err();
        assert!(err.to_string().contains("rgb_shfit"), "{err}");
        assert!(PipelineConfig::from_toml_str("colour = 1\n").is_err());
    }

    #[test]
    fn unordered_range_rejected() {
        let err = PipelineConfig::from_toml_str("[stg]\nscale = [1.1, 0.9]\n").unwrap_err();
        assert!(err.to_string().contains("stg.scale"), "{err}");
    }

    #[test]
    fn bad_ratio_and_version_rejected() {
        assert!(PipelineConfig::from_toml_str("[mask]\nratio_choices = [1.5]\n").is_err());
        assert!(PipelineConfig::from_toml_str("[mask]\nratio_choices = []\n").is_err());
        assert!(PipelineConfig::from_toml_str("schema_version = 2\n").is_err());
    }
}
