use thiserror::Error;

/// Errors raised by measure construction, operators and estimators.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("structural mismatch: {0}")]
    Structural(String),
    #[error("strong separation violated between maps {first} and {second} (gap {gap:.3e})")]
    Separation {
        first: usize,
        second: usize,
        gap: f64,
    },
    #[error("normalization undefined: {0}")]
    Normalization(String),
    #[error("conditioning undefined: {0}")]
    Conditioning(String),
    #[error("undefined magnification: the point's cell has zero mass")]
    UndefinedMagnification,
    #[error("empty scenery: zoom window carries no mass")]
    EmptyScenery,
    #[error("resolution exceeded: {what} (required depth {required})")]
    Resolution { what: String, required: u32 },
    #[error("point leaves the support at depth {depth}")]
    Support { depth: u32 },
    #[error("growth constraints violated at levels {0:?}")]
    ConstraintViolation(Vec<usize>),
    #[error("regularity error: {0}")]
    Regularity(String),
    #[error("undefined dimension: {0}")]
    UndefinedDimension(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures that come from numerics (support, resolution, empty
    /// windows) rather than from invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UndefinedMagnification
                | Error::EmptyScenery
                | Error::Resolution { .. }
                | Error::Support { .. }
                | Error::Normalization(_)
                | Error::Conditioning(_)
                | Error::UndefinedDimension(_)
                | Error::Regularity(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
