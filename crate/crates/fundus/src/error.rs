//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by the fundus pipeline and its building blocks.
#[derive(Debug, thiserror::Error)]
pub enum FundusError {
    /// An operation received input that violates its preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration file or override could not be parsed or is out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Required trained artifacts are missing.
    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    /// Geometry too degenerate to fit (e.g. all vessel points collinear
    /// through the vertex).
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    /// A persisted file has the wrong magic, version, or layout.
    #[error("malformed file: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl From<csv::Error> for FundusError {
    fn from(e: csv::Error) -> Self {
        FundusError::Format(format!("csv: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, FundusError>;

impl FundusError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        FundusError::InvalidInput(msg.into())
    }
}
