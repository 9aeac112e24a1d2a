use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),

    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset must contain at least one row")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("classifier has no component along the mean direction or the noise subspace")]
    DegenerateClassifier,

    #[error("consensus set is empty: every prediction disagrees with the given label")]
    EmptyConsensus(Box<crate::linear::RetrainReport>),

    #[error("substream seed collision between trials {first:?} and {second:?}")]
    SeedCollision {
        first: (usize, usize),
        second: (usize, usize),
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
