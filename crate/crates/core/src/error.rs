use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes. The CLI maps these onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Io,
    Format,
    Numeric,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 1,
            ErrorCategory::Io => 2,
            ErrorCategory::Format => 3,
            ErrorCategory::Numeric => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: expected at least 4 fields")]
    MalformedLine { line: usize },
    #[error("line {line}: invalid UTF-8")]
    Encoding { line: usize },
    #[error("cannot interpret timestamp {0:?} under the configured ordering")]
    UnparseableTimestamp(String),
    #[error("fact {fact} appears in both the {first} and {second} splits")]
    OverlappingSplits {
        fact: String,
        first: &'static str,
        second: &'static str,
    },
    #[error("dataset is already inverse-augmented")]
    AlreadyAugmented,
    #[error("dataset must be inverse-augmented first")]
    NotAugmented,
    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("backward requires a single-element root, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("period P[{index}] = {period} does not divide horizon {horizon}")]
    PeriodNotDividing {
        index: usize,
        period: usize,
        horizon: usize,
    },
    #[error("target sequence {0} is constant")]
    ConstantTarget(usize),
    #[error("need at least two entities for negative sampling")]
    TooFewEntities,
    #[error("gold candidate is masked")]
    GoldMasked,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid format in {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::ShapeMismatch {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_)
            | Error::AlreadyAugmented
            | Error::NotAugmented
            | Error::DimensionMismatch(_)
            | Error::PeriodNotDividing { .. }
            | Error::ConstantTarget(_)
            | Error::TooFewEntities => ErrorCategory::Config,
            Error::Io { .. } => ErrorCategory::Io,
            Error::MalformedLine { .. }
            | Error::Encoding { .. }
            | Error::UnparseableTimestamp(_)
            | Error::OverlappingSplits { .. }
            | Error::Format { .. }
            | Error::CheckpointVersion { .. } => ErrorCategory::Format,
            Error::IndexOutOfRange { .. }
            | Error::ShapeMismatch { .. }
            | Error::NonScalarRoot(_)
            | Error::GoldMasked
            | Error::Numeric(_) => ErrorCategory::Numeric,
        }
    }
}
