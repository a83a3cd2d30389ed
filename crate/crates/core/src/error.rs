use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Raster axis named in bounds errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Col,
    Band,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Row => "row",
            Axis::Col => "col",
            Axis::Band => "band",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: malformed JSON: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{axis} index {index} out of bounds (size {size})")]
    OutOfBounds {
        axis: Axis,
        index: usize,
        size: usize,
    },

    #[error("{}: data file holds {actual} bytes, header implies {expected}", path.display())]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("invalid {kind} code {code} at row {row}, col {col}")]
    CodeDomain {
        kind: &'static str,
        code: u8,
        row: usize,
        col: usize,
    },

    #[error("feature {index}: {reason}")]
    Feature { index: usize, reason: String },

    #[error("invalid GeoJSON: {0}")]
    GeoJson(String),

    #[error("training: {0}")]
    Training(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("expected {expected} features, got {actual}")]
    FeatureCount { expected: usize, actual: usize },

    #[error("non-finite value in feature {feature}")]
    NonFiniteFeature { feature: usize },

    #[error("non-finite value at row {row}, col {col}, band {band}")]
    NonFinitePixel { row: usize, col: usize, band: usize },

    #[error("{0}")]
    Mismatch(String),

    #[error("no palette entry for code {0}")]
    MissingPalette(u8),

    #[error("metrics: {0}")]
    Metrics(String),

    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),

    #[error("png encoding: {0}")]
    Png(#[from] png::EncodingError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl fmt::Display, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.to_string(),
            source,
        }
    }

    /// True for failures of the file system rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
