//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid subspace split: n = {n} exceeds rank r = {rank}")]
    InvalidSplit { n: usize, rank: usize },

    #[error("degenerate spectrum: all eigenvalues are zero")]
    DegenerateSpectrum,

    #[error("epoch {epoch} out of range [0, {total}]")]
    EpochOutOfRange { epoch: usize, total: usize },

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("input {height}x{width} too small for {conv_layers} conv layers; minimum side is {min_side}")]
    ImageTooSmall {
        height: usize,
        width: usize,
        conv_layers: usize,
        min_side: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint is config-incompatible; changed fields: {}", fields.join(", "))]
    ConfigMismatch { fields: Vec<String> },

    #[error("checksum error: {0}")]
    Checksum(String),

    #[error("non-finite loss at epoch {epoch}, iteration {iteration}{}",
            last_checkpoint.as_ref().map(|p| format!("; last good checkpoint: {}", p.display())).unwrap_or_default())]
    NonFiniteLoss {
        epoch: usize,
        iteration: usize,
        last_checkpoint: Option<PathBuf>,
    },

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 for aborted training, 2 for
    /// config/usage problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFiniteLoss { .. } => 1,
            _ => 2,
        }
    }
}
