use thiserror::Error;

/// Errors produced by the alignment, loss, and lab routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("weights are not on the simplex: {0}")]
    NotSimplex(String),

    #[error("target weight {index} is {value:e}, below the strict minimum 1e-12")]
    ZeroTargetWeight { index: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),

    #[error("invalid label sequence: {0}")]
    InvalidLabels(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("target of length {target} (with {repeats} adjacent repeats) cannot be emitted in {frames} frames")]
    Infeasible {
        frames: usize,
        target: usize,
        repeats: usize,
    },

    #[error("enumeration bound exceeded: {0}")]
    TooLarge(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
