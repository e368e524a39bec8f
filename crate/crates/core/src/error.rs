use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid world spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid class index {0} (expected 0..=5)")]
    UnknownClass(u8),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("rollout length must be at least 1")]
    EmptyRollout,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no collision-free placement after {0} attempts")]
    Placement(usize),

    #[error("episode is finished; call reset first")]
    EpisodeDone,

    #[error("episode not started; call reset first")]
    NotReset,

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("relabel source must come from the same episode at a later step: {0}")]
    InvalidRelabel(String),

    #[error("non-contiguous step {got} for episode {episode} (expected {expected})")]
    NonContiguousStep {
        episode: u64,
        expected: u64,
        got: u64,
    },

    #[error("goal must be non-zero")]
    ZeroGoal,

    #[error("observation modality mismatch: {0}")]
    Modality(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("bad file format: {0}")]
    Format(String),

    #[error("translator failed: {0}")]
    Translator(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    IoPlain(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
