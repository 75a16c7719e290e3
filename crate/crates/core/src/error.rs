use std::path::PathBuf;

use crate::image::PixelLocation;

/// Errors raised while parsing a binary graymap.
///
/// Every variant carries the byte offset at which parsing stopped.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("bad magic at byte {offset}: expected \"P5\"")]
    BadMagic { offset: usize },
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("unsupported bit depth at byte {offset}: maxval {maxval} (only 8-bit graymaps are supported)")]
    UnsupportedDepth { offset: usize, maxval: u32 },
    #[error("truncated payload at byte {offset}: expected {expected} pixel bytes, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
}

/// Errors raised while reading or validating a model file.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelFileError {
    #[error("not a model file: bad magic bytes")]
    BadMagic,
    #[error("unsupported model schema version {found} (this build reads version {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("kind/payload mismatch: {0}")]
    KindMismatch(String),
    #[error("truncated model file: {0}")]
    Truncated(String),
    #[error("malformed model header: {0}")]
    Header(String),
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Pgm {
        path: PathBuf,
        #[source]
        source: PgmError,
    },
    #[error(transparent)]
    PgmData(#[from] PgmError),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("location {location} is outside a {width}x{height} image")]
    OutOfBounds {
        location: PixelLocation,
        width: usize,
        height: usize,
    },
    #[error("location {0} is already measured")]
    AlreadyMeasured(PixelLocation),
    #[error("measurement set is empty")]
    EmptyMeasurementSet,
    #[error("every pixel is already measured")]
    FullyMeasured,
    #[error("location {0} is not the latest measurement")]
    NotLatestMeasurement(PixelLocation),
    #[error("feature length mismatch: expected {expected}, got {found}")]
    FeatureLength { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty training database")]
    EmptyDatabase,
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("measurement source failed at step {step}: {reason}")]
    Source { step: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
