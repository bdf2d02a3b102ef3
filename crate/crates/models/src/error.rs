use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("the training set is empty")]
    EmptyDataset,
    #[error("chord-conditioned generation needs at least one chord")]
    EmptyChords,
    #[error("cannot sample from a degenerate distribution ({0})")]
    DegenerateDistribution(String),
    #[error("sequence {0} has fewer than two tokens")]
    SequenceTooShort(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Nn(#[from] chordgen_nn::NnError),
}
