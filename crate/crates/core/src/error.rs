use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum FadError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<FadError>,
    },

    #[error("song {song_id:?}: {source}")]
    InSong {
        song_id: String,
        #[source]
        source: Box<FadError>,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },

    #[error("trailing bytes after payload: {0}")]
    TrailingBytes(u64),

    #[error("non-finite frame value at row {row}, column {col}")]
    NonFiniteFrame { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("empty frame set")]
    EmptyFrameSet,

    #[error("empty collection: {0}")]
    EmptyCollection(&'static str),

    #[error("count < 2: covariance undefined")]
    CovarianceUndefined,

    #[error("invalid model info: {0}")]
    InvalidModel(String),

    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),

    #[error("covariance is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error(
        "numerical breakdown: eigenvalue {eigenvalue:e} below -{tolerance:e} x largest ({largest:e})"
    )]
    NegativeEigenvalue {
        eigenvalue: f64,
        largest: f64,
        tolerance: f64,
    },

    #[error("stats cache hash mismatch: the source set changed since the cache was written")]
    HashMismatch,

    #[error("no songs in {0}")]
    NoSongs(PathBuf),

    #[error("need >= 2 distinct sizes, got {0}")]
    TooFewSizes(usize),

    #[error("sample size {size} outside [{min}, {max}]")]
    SizeOutOfRange { size: usize, min: usize, max: usize },

    #[error("pool of {pool} units is too small, need at least {required}")]
    PoolTooSmall { pool: usize, required: usize },

    #[error("invalid fraction {0}: must satisfy 0 < fraction < 0.5")]
    InvalidFraction(f64),

    #[error("invalid k {k} for a table of {len} scored songs")]
    InvalidK { k: usize, len: usize },

    #[error("table too short: {0} scored songs, need at least 2")]
    TableTooShort(usize),

    #[error("duplicate song id {0:?}")]
    DuplicateSong(String),

    #[error("missing song {0:?}")]
    MissingSong(String),

    #[error("key sets differ: {0}")]
    KeyMismatch(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("unknown effect {0:?}")]
    UnknownEffect(String),

    #[error("csv error in {context}: {message}")]
    Csv { context: String, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl FadError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FadError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_file(path: impl Into<PathBuf>, source: FadError) -> Self {
        match source {
            already @ (FadError::Io { .. } | FadError::InFile { .. }) => already,
            other => FadError::InFile {
                path: path.into(),
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T, E = FadError> = std::result::Result<T, E>;
