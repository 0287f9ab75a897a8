use thiserror::Error;

/// Errors produced by graph construction, detectors and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex id {id} out of range for a graph with {p} vertices")]
    InvalidVertex { id: usize, p: usize },

    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("arc ({tail}, {head}) has weight {weight}; weights must be finite and positive")]
    BadWeight {
        tail: usize,
        head: usize,
        weight: f64,
    },

    #[error("duplicate arc ({tail}, {head})")]
    DuplicateArc { tail: usize, head: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("exhaustive enumeration refused: p = {p} exceeds the guard of {guard}")]
    TooLarge { p: usize, guard: usize },

    #[error("empty feasible class")]
    EmptyFeasibleClass,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("trial {trial} failed: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
