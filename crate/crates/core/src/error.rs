use thiserror::Error;

/// Errors raised by the optimizer passes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown loop `{0}`")]
    UnknownLoop(String),

    #[error("not a finite element integration nest: {0}")]
    NotFemNest(String),

    #[error("cannot expand over `{0}`: it occurs under a division or a call")]
    NonDistributable(String),

    #[error("expression is not in normal form: {0}")]
    NotNormalForm(String),

    #[error("monomial is not separable: {0}")]
    NonSeparable(String),

    #[error("too many pre-evaluation candidates ({0}, at most 16 supported)")]
    TooManyMonomials(usize),

    #[error("inconsistent zero layout: {0}")]
    InconsistentLayout(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("invalid kernel: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported for this scalar type: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
