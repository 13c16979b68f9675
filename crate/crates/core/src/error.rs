use thiserror::Error;

/// Errors raised by the solvers and data generators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("atom {index} is the zero vector")]
    InvalidAtom { index: usize },

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("singular least-squares system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("no candidate atoms left to select")]
    EmptyCandidates,

    #[error("dictionary has no atoms")]
    EmptyDictionary,

    #[error("dictionary carries no class labels")]
    MissingClassLabels,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, found })
    }
}
