use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sequence too short: length {len} must exceed the prediction horizon K = {k}")]
    SequenceTooShort { len: usize, k: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("character token {0} is absent from the character marginals")]
    UnknownCharacter(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(std::path::PathBuf),

    #[error("malformed artifact: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
