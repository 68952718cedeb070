use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("no prediction for gold id `{0}`")]
    MissingPrediction(String),

    #[error("prediction id `{0}` does not appear in the gold labels")]
    UnknownId(String),

    #[error("member `{model_id}` does not share the id set of `{reference}`: {detail}")]
    IdMismatch {
        reference: String,
        model_id: String,
        detail: String,
    },

    #[error("member `{model_id}` is {found}, expected {expected}")]
    MemberMismatch {
        model_id: String,
        expected: String,
        found: String,
    },

    #[error("invalid weights: {0}")]
    WeightError(String),

    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),

    #[error("invalid search grid: {0}")]
    InvalidGrid(String),

    #[error("candidate set has no baseline")]
    NoBaseline,

    #[error("candidate set has more than one baseline (`{0}`)")]
    MultipleBaselines(String),

    #[error("duplicate model id `{0}`")]
    DuplicateModelId(String),

    #[error("gold labels contain no polarized samples")]
    DegenerateGold,

    #[error("track sets differ: {0}")]
    TrackMismatch(String),

    #[error("value {value} for `{field}` is outside [0, 1]")]
    FractionOutOfRange { field: String, value: f64 },

    #[error("ratio for `{field}` must be positive, got {value}")]
    NonPositiveRatio { field: String, value: f64 },

    #[error("cannot tokenize an empty word")]
    EmptyWord,

    #[error("word `{0}` contains whitespace")]
    WhitespaceInWord(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("word `{0}` is not in the subword-count table")]
    UnknownWord(String),

    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: line {line}: probability {value} for id `{id}` is outside [0, 1]", path.display())]
    Range {
        path: PathBuf,
        line: u64,
        id: String,
        value: String,
    },

    #[error("{}: line {line}: duplicate id `{id}`", path.display())]
    DuplicateId { path: PathBuf, line: u64, id: String },

    #[error("{}: no data rows", path.display())]
    EmptyInput { path: PathBuf },

    #[error("ledger already holds a record for {0}")]
    Conflict(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            _ => ErrorCategory::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
