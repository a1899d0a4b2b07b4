use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("threshold {0} is outside the open interval (0, 1)")]
    ThresholdOutOfRange(f64),

    #[error("lower bound exceeds upper bound in dimension {dim} ({lower} > {upper})")]
    BoundViolation { dim: usize, lower: f64, upper: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero-norm vector at row {0}; cosine distance is undefined")]
    ZeroNorm(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("every point was labelled noise; no region can be built")]
    AllNoise,

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("covariance of component {component} is not positive definite")]
    NotPositiveDefinite { component: usize },

    #[error("projected variance of component {component} is negative ({variance})")]
    NegativeVariance { component: usize, variance: f64 },

    #[error("bad magic bytes {0:?}, expected \"AVEC\"")]
    BadMagic([u8; 4]),

    #[error("unsupported AVEC version {0}")]
    UnsupportedVersion(u8),

    #[error("unsupported AVEC dtype {0}")]
    UnsupportedDtype(u8),

    #[error("truncated header: {0} bytes")]
    TruncatedHeader(usize),

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },

    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("label count mismatch: {labels} labels for {rows} rows")]
    LabelCountMismatch { labels: usize, rows: usize },

    #[error("invalid label {value:?} on line {line}")]
    InvalidLabel { line: usize, value: String },

    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}
