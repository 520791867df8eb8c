use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulation and reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("shear index ({k}, {l}) out of range for a {n1}x{n2} schedule")]
    ShearIndex { k: usize, l: usize, n1: usize, n2: usize },

    #[error("invalid shear schedule: {0}")]
    InvalidSchedule(String),

    #[error("carrier check failed: {0}")]
    CarrierCheck(String),

    #[error("no interference coverage: update denominator is zero everywhere")]
    NoCoverage,

    #[error("empty comparison mask (no pixel with positive weight)")]
    EmptyMask,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("cannot read image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("bad magic bytes")]
    BadMagic,

    #[error("truncated container: {0}")]
    Truncated(String),

    #[error("unsupported container version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed container: {0}")]
    Malformed(String),

    #[error("sweep failed: {failed} of {total} repeats errored")]
    SweepFailed { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical pipeline, as opposed to bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoCoverage | Error::NonFinite(_) | Error::SweepFailed { .. } | Error::CarrierCheck(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
