use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("directory file {path}, line {line}: {message}")]
    Directory {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("analysis cohort is empty (no internal actors survived the cohort policy)")]
    EmptyCohort,

    #[error("no events remain inside the observation window {start} .. {end}")]
    EmptyWindow { start: String, end: String },

    #[error("unknown actor id {0}")]
    UnknownActor(u32),

    #[error("cohort member {actor} has no connectivity entry; the graph must cover the cohort")]
    CohortNotCovered { actor: u32 },

    #[error("required field {field} is missing for actor {actor}")]
    MissingField { actor: u32, field: &'static str },

    #[error("rank must be 1, 2 or 3, got {0}")]
    InvalidRank(i64),

    #[error("percentile ranking needs at least one non-missing value")]
    AllMissing,

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("logit fit failed: {0}")]
    Logit(String),

    #[error(
        "quasi-complete separation detected: coefficients diverge and the \
         information matrix is ill-conditioned ({0})"
    )]
    Separation(String),

    #[error("infeasible generator configuration: {0}")]
    SynthConfig(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable kind tag used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Config(_) | Error::EmptyCohort | Error::EmptyWindow { .. } => "config",
            Error::Directory { .. } => "directory",
            Error::UnknownActor(_) | Error::CohortNotCovered { .. } => "actor",
            Error::MissingField { .. } | Error::InvalidRank(_) => "field",
            Error::AllMissing | Error::Domain(_) => "domain",
            Error::Logit(_) | Error::Separation(_) => "stats",
            Error::SynthConfig(_) => "synth",
        }
    }

    /// Errors that stem from how the run was configured rather than from the
    /// data; the CLI maps these to a dedicated exit status.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::EmptyCohort | Error::EmptyWindow { .. } | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
