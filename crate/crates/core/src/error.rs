use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("background `{0}` requires a source")]
    MissingSource(&'static str),

    #[error("no teacher features stored for source `{0}`")]
    MissingFeatures(String),

    #[error("corrupt feature archive {path}: {reason}")]
    Archive { path: String, reason: String },

    #[error("corrupt shard record {record}: {reason}")]
    Corrupt { record: usize, reason: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

/// Coarse classification used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Integrity,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) | Error::Image(_) => ErrorClass::Io,
            Error::Archive { .. }
            | Error::Corrupt { .. }
            | Error::Version { .. }
            | Error::NonFinite(_)
            | Error::MissingFeatures(_) => ErrorClass::Integrity,
            Error::Config(_)
            | Error::Shape(_)
            | Error::OutOfRange { .. }
            | Error::MissingSource(_)
            | Error::Json(_) => ErrorClass::Config,
        }
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
