use std::fmt;

/// Errors produced by model construction and analysis.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A partition failed validation; the message names the offending site
    /// or label (sites are 1-based in messages).
    InvalidPartition(String),
    /// Two values built over different index sets were combined.
    SizeMismatch { left: usize, right: usize },
    /// An operation that needs a nonempty family received an empty one.
    EmptyFamily,
    /// A closure, state space or table outgrew its configured cap.
    CapExceeded {
        what: &'static str,
        cap: usize,
        reached: usize,
    },
    /// A probability table failed validation (negative entry, bad total
    /// mass, shape mismatch).
    InvalidMeasure(String),
    /// A partition weight vector failed validation.
    InvalidWeights(String),
    /// A number, partition string or report could not be parsed.
    Parse(String),
    /// The model admits no quasi-stationary regime (the operator is the
    /// identity, or every state on the way to absorption has zero holding
    /// probability).
    DegenerateModel(String),
    /// The geometric series behind a hitting functional diverges at the
    /// named state.
    DivergentFunctional { state: String, diagonal: String },
    /// An identity the theory guarantees did not hold; this indicates a
    /// bug, not a bad model.
    InternalConsistency(String),
    /// A caller-supplied argument was out of range or malformed.
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidPartition(msg) => write!(f, "invalid partition: {msg}"),
            Error::SizeMismatch { left, right } => {
                write!(f, "index set sizes differ: {left} vs {right}")
            }
            Error::EmptyFamily => write!(f, "partition family is empty"),
            Error::CapExceeded { what, cap, reached } => {
                write!(f, "{what} cap exceeded: reached {reached} with cap {cap}")
            }
            Error::InvalidMeasure(msg) => write!(f, "invalid measure: {msg}"),
            Error::InvalidWeights(msg) => write!(f, "invalid partition weights: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::DegenerateModel(msg) => write!(f, "degenerate model: {msg}"),
            Error::DivergentFunctional { state, diagonal } => write!(
                f,
                "hitting functional diverges at state {state} (diagonal {diagonal})"
            ),
            Error::InternalConsistency(msg) => write!(f, "internal consistency error: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
