use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects that must share a structure (groupoid, bundle, bitorsor) do not.
    #[error("structural error: {0}")]
    Structural(String),

    /// A postcondition or numerical contract failed.
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid bimodule: {0}")]
    InvalidBimodule(String),

    #[error("{path}:{line}: {kind}: {message}")]
    Scenario {
        path: PathBuf,
        line: usize,
        kind: ScenarioErrorKind,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioErrorKind {
    Parse,
    UnresolvedReference,
    InvariantViolation,
}

impl std::fmt::Display for ScenarioErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScenarioErrorKind::Parse => "parse error",
            ScenarioErrorKind::UnresolvedReference => "unresolved reference",
            ScenarioErrorKind::InvariantViolation => "invariant violation",
        })
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn structural<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Structural(msg.into()))
}

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
