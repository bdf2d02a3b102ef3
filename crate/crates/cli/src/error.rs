use std::path::Path;

use chordgen_models::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("unparseable chord {chord:?} at {location}")]
    UnparseableChord { chord: String, location: String },
    #[error("generated and ground-truth phrases do not align: {0}")]
    Alignment(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl CliError {
    /// 1 for usage and configuration problems, 2 for bad or missing data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InvalidConfig(_) | CliError::Model(ModelError::InvalidConfig(_)) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<chordgen_core::dataset::DatasetError> for CliError {
    fn from(e: chordgen_core::dataset::DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}
