use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate paper id `{0}`")]
    DuplicatePaper(String),

    #[error("duplicate label id `{0}`")]
    DuplicateLabel(String),

    #[error("label `{0}` has no usable name")]
    LabelWithoutNames(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("unknown paper id `{0}`")]
    UnknownPaper(String),

    #[error("unknown label id `{0}`")]
    UnknownLabel(String),

    #[error("graph too sparse for meta-path {0}")]
    SparseGraph(String),

    #[error("non-finite value at training step {step}: {what}")]
    NonFinite { step: usize, what: String },

    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
