use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A scenario field is missing, malformed, or outside its allowed range.
    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    /// The configuration document could not be decoded.
    #[error("failed to parse scenario document at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("array geometry has no elements")]
    EmptyGeometry,

    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A STARS profile violates its energy or role constraints.
    #[error("infeasible STARS profile at elements {elements:?}: {message}")]
    Constraint { elements: Vec<usize>, message: String },

    /// The requested phase schedule cannot be built or a user is served on the wrong side.
    #[error("scheduling error: {0}")]
    Schedule(String),

    #[error("no sensing aperture: the surface has no sensing elements")]
    SensingImpossible,

    /// The Fisher information is singular, so the target angles cannot be bounded.
    #[error("target {target_id} is unidentifiable: {reason}")]
    Unidentifiable { target_id: usize, reason: String },

    #[error("signal subspace undefined: MUSIC needs at least two sensing elements, got {0}")]
    SubspaceUndefined(usize),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}
