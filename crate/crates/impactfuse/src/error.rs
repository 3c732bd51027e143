use std::fmt;
use std::path::PathBuf;

use impactfuse_core::corpus::CorpusError;
use impactfuse_core::emb::{EmbError, MissingIds};
use impactfuse_core::fusion::FusionError;
use impactfuse_core::lsa::LsaError;
use impactfuse_core::metrics::MetricsError;
use impactfuse_core::mlp::MlpError;
use impactfuse_core::tfidf::TfidfError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage an error came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Split,
    Tfidf,
    Lsa,
    Align,
    Fusion,
    Train,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Split => "split",
            Stage::Tfidf => "tf-idf",
            Stage::Lsa => "lsa",
            Stage::Align => "align",
            Stage::Fusion => "fusion",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        })
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Tfidf(#[from] TfidfError),
    #[error(transparent)]
    Lsa(#[from] LsaError),
    #[error(transparent)]
    Missing(#[from] MissingIds),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Dataset { path: PathBuf, source: CorpusError },
    #[error("{}: {source}", path.display())]
    Emb { path: PathBuf, source: EmbError },
    #[error("{}: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("split mismatch: {0}")]
    SplitMismatch(String),
    #[error("an ablation needs at least two combinations")]
    NeedTwoCombos,
    #[error("{stage} stage: {source}")]
    Stage { stage: Stage, source: StageError },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn stage<E: Into<StageError>>(stage: Stage) -> impl FnOnce(E) -> Error {
        move |e| Error::Stage {
            stage,
            source: e.into(),
        }
    }

    /// Bad inputs (exit code 1) as opposed to failures while computing or
    /// writing results (exit code 2).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Dataset { .. }
            | Error::Emb { .. }
            | Error::Config(_)
            | Error::SplitMismatch(_)
            | Error::NeedTwoCombos => true,
            Error::Stage { source, .. } => matches!(source, StageError::Missing(_)),
            Error::Io { .. } | Error::Checkpoint { .. } => false,
        }
    }
}
