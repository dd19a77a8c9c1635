use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SbiError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SbiError {
    #[error("shape mismatch between {left} ({left_dims}) and {right} ({right_dims})")]
    Shape {
        left: &'static str,
        left_dims: String,
        right: &'static str,
        right_dims: String,
    },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate hull: {0}")]
    DegenerateHull(String),

    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("corrupted recipe: {0}")]
    CorruptedRecipe(String),

    #[error("recipe version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl SbiError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SbiError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short, stable label used in batch skip logs and run summaries.
    pub fn reason(&self) -> &'static str {
        match self {
            SbiError::Shape { .. } => "shape mismatch",
            SbiError::InvalidRaster(_) => "invalid raster",
            SbiError::Parameter(_) => "invalid parameter",
            SbiError::Precondition(_) => "precondition violated",
            SbiError::DegenerateHull(_) => "degenerate hull",
            SbiError::EmptyMask(_) => "empty mask",
            SbiError::CorruptedRecipe(_) => "corrupted recipe",
            SbiError::VersionMismatch { .. } => "version mismatch",
            SbiError::Config(_) => "invalid config",
            SbiError::Manifest { .. } => "malformed manifest",
            SbiError::Validation(_) => "validation failed",
            SbiError::UndefinedMetric(_) => "undefined metric",
            SbiError::Io { .. } => "i/o error",
            SbiError::Codec { .. } => "image codec error",
            SbiError::Serde(_) => "serialization error",
        }
    }
}
