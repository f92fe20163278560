use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors surfaced by subcommands, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("missing {artifact}; run `greenai {producer}` first")]
    MissingArtifact { artifact: PathBuf, producer: &'static str },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::MissingArtifact { .. } | CliError::Io { .. } => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(
    greenai_core::corpus::CorpusError,
    greenai_core::textprep::TextError,
    greenai_core::embedding::EmbeddingError,
    greenai_core::topicmodel::TopicError,
    greenai_core::analytics::AnalyticsError,
    greenai_core::impact::ImpactError,
    greenai_core::umap::UmapError,
    csv::Error,
    serde_json::Error
);

pub type Result<T> = std::result::Result<T, CliError>;
