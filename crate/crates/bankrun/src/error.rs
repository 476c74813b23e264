use std::path::PathBuf;

use bankrun_core::corpus::CorpusError;
use bankrun_core::llmgate::LlmError;
use bankrun_core::metrics::MetricsError;

/// Process exit status for each class of failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Success = 0,
    Config = 2,
    Dependency = 3,
    Data = 4,
    External = 5,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("unknown report preset {0:?}; known: {1}")]
    UnknownPreset(String, String),
    #[error("stage {stage} has not produced {path}; run it first")]
    MissingDependency { stage: String, path: PathBuf },
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("{path}: {count} malformed record(s), first at line {line}: {reason}")]
    MalformedRecords { path: PathBuf, count: usize, line: usize, reason: String },
    #[error("duplicate article_id {0}")]
    DuplicateId(String),
    #[error("{0}: input does not match the preset schema: {1}")]
    SchemaMismatch(String, String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Data(String),
    #[error("language model: {0}")]
    Llm(LlmError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub fn class(&self) -> ExitClass {
        match self {
            Error::ConfigInvalid(_) | Error::UnknownPreset(..) => ExitClass::Config,
            Error::MissingDependency { .. } => ExitClass::Dependency,
            Error::Llm(LlmError::LlmUnavailable { .. }) => ExitClass::External,
            Error::FileNotFound(_)
            | Error::MalformedRecords { .. }
            | Error::DuplicateId(_)
            | Error::SchemaMismatch(..)
            | Error::Corpus(_)
            | Error::Metrics(_)
            | Error::Data(_)
            | Error::Llm(_)
            | Error::Io { .. } => ExitClass::Data,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class() as i32
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}

impl From<LlmError> for Error {
    fn from(e: LlmError) -> Self {
        Error::Llm(e)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
