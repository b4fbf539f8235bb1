use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the matching pipeline.
#[derive(Debug, Error)]
pub enum McmError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("{path}: unsupported image format (expected PNG or binary PPM)")]
    UnsupportedFormat { path: PathBuf },
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("raster is {raster_width}x{raster_height} but mask is {mask_width}x{mask_height}")]
    DimensionMismatch {
        raster_width: usize,
        raster_height: usize,
        mask_width: usize,
        mask_height: usize,
    },
    #[error("pixel buffer holds {actual} pixels, expected {expected}")]
    PixelCount { expected: usize, actual: usize },
    #[error("mask has no foreground pixels{}", region_suffix(.region))]
    EmptyMask { region: Option<String> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("could not place patch {patch} of {requested} after {attempts} attempts in band rows {y_top}..{y_bottom}")]
    Sampling {
        patch: usize,
        requested: usize,
        attempts: usize,
        y_top: usize,
        y_bottom: usize,
    },
    #[error("part index {index} out of range (descriptor has {parts} parts)")]
    PartIndex { index: usize, parts: usize },
    #[error("part count mismatch: {left} vs {right}")]
    PartCountMismatch { left: usize, right: usize },
    #[error("cannot merge descriptors of different persons: {left:?} and {right:?}")]
    PersonMismatch { left: String, right: String },
    #[error("set distance requires non-empty sets")]
    EmptySet,
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("probe {probe:?} has no ground-truth template in its gallery")]
    MissingGroundTruth { probe: String },
    #[error("descriptor schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("malformed descriptor: {0}")]
    Format(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(String),
}

fn region_suffix(region: &Option<String>) -> String {
    match region {
        Some(r) => format!(" in {r}"),
        None => String::new(),
    }
}

impl McmError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        McmError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's arguments rather than by data.
    pub fn is_usage(&self) -> bool {
        matches!(self, McmError::InvalidArgument(_) | McmError::Config(_))
    }
}

pub type Result<T, E = McmError> = std::result::Result<T, E>;
