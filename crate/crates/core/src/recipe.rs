//! Recipe records: the complete parameter log of one generated sample.
//!
//! Recipes serialise to pretty-printed JSON, one file per sample. Fields
//! appear in execution order. Floats use shortest round-trip formatting,
//! so a recipe read back from disk replays bit-exactly.
//!
//! ```json
//! {
//!   "version": 1,
//!   "key": { "entry_index": 3, "sample_index": 0, "image": "faces/003.png" },
//!   "seed": 42,
//!   "stream_id": 1234567890,
//!   "base_digest": "9f2c…",
//!   "crop": { "margin": 0.113, "mode": "per_side", "rect": [10, 8, 74, 80] },
//!   "stg": { "source_is_augmented": true, "color": { … }, "frequency": { … } },
//!   "resize_translate": { "u_h": 1.01, …, "shift_x": -1 },
//!   "mask": { "landmark_offsets": [[0.4, -1.2], …], "elastic_alpha": 3.1,
//!             "elastic_sigma": 5.2, "elastic_field_stream": 987, "k1": 9, "k2": 5,
//!             "ratio": 0.75 }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::MarginMode;
use crate::error::{Result, SbiError};
use crate::mg::MaskParams;
use crate::stg::{ResizeTranslateParams, StgRecord};

pub const RECIPE_VERSION: u32 = 1;

/// Which manifest entry and sample a recipe belongs to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleKey {
    pub entry_index: u64,
    pub sample_index: u64,
    /// Image path as written in the manifest.
    pub image: String,
}

/// Face crop applied to the manifest image before synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRecord {
    pub margin: f64,
    pub mode: MarginMode,
    /// `[x0, y0, x1, y1]`, end-exclusive, in source-image pixels.
    pub rect: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeRecord {
    pub version: u32,
    pub key: SampleKey,
    pub seed: u64,
    pub stream_id: u64,
    /// Content digest of the (cropped) base image the sample was made from.
    pub base_digest: String,
    pub crop: Option<CropRecord>,
    pub stg: StgRecord,
    pub resize_translate: ResizeTranslateParams,
    pub mask: MaskParams,
}

impl RecipeRecord {
    /// Structural range checks. Any failure means the record was edited or damaged.
    pub fn validate(&self, height: usize, width: usize, landmark_count: usize) -> Result<()> {
        if self.version != RECIPE_VERSION {
            return Err(SbiError::VersionMismatch {
                expected: RECIPE_VERSION,
                found: self.version,
            });
        }
        let corrupted = |e: SbiError| SbiError::CorruptedRecipe(e.to_string());
        self.stg.validate().map_err(corrupted)?;
        self.resize_translate
            .check_consistent(height, width)
            .map_err(corrupted)?;
        self.mask.validate(landmark_count).map_err(corrupted)?;
        if let Some(crop) = &self.crop {
            let [x0, y0, x1, y1] = crop.rect;
            if !(crop.margin.is_finite() && crop.margin >= 0.0) || x0 >= x1 || y0 >= y1 {
                return Err(SbiError::CorruptedRecipe(format!("invalid crop {crop:?}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| SbiError::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SbiError::CorruptedRecipe(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SbiError::io(path, e))?;
        Self::from_json(&text)
    }
}
