use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported image format: {} ({reason})", path.display())]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("corrupt image data in {}: {reason}", path.display())]
    CorruptImage { path: PathBuf, reason: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported channel count {0}")]
    UnsupportedChannels(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("channel mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("odd spatial size {h}x{w}; wavelet pooling needs even dimensions")]
    OddDimensions { h: usize, w: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in tensor data")]
    NonFinite,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("weight file format error: {0}")]
    WeightFormat(String),

    #[error("weight file truncated: {0}")]
    Truncated(String),

    #[error("network/weights mismatch: {0}")]
    SpecMismatch(String),

    #[error("malformed gain profile: {0}")]
    MalformedProfile(String),

    #[error("image too small: {0}")]
    TooSmall(String),

    #[error("json error in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
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
