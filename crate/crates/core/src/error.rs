use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong inside the core crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    EmptyCorpus,
    QueryTooLong { len: usize, max_len: usize },
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    OutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    NonScalarLoss(Vec<usize>),
    NonFiniteGradient(String),
    NonFiniteLoss { step: usize },
    NonFiniteParameter(String),
    /// NaN or `+inf` reached an operation that cannot absorb it.
    NonFiniteValue(&'static str),
    /// Finite-difference check exceeded its tolerance (worst relative error).
    GradientCheck(f64),
    AllPositionsMasked,
    NothingToDecode,
    InvalidSpan { start: usize, end: usize, len: usize },
    MissingParameter(String),
    Misaligned(String),
    InvalidConfig(String),
    InvalidVocabulary(String),
    Checkpoint(String),
    InvalidExample(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCorpus => f.write_str("empty corpus"),
            Error::QueryTooLong { len, max_len } => {
                write!(f, "query too long ({len} tokens, max_len {max_len})")
            }
            Error::ShapeMismatch { op, left, right } => {
                write!(f, "shape mismatch in {op}: {left:?} vs {right:?}")
            }
            Error::OutOfRange { what, index, bound } => {
                write!(f, "{what} {index} out of range (bound {bound})")
            }
            Error::NonScalarLoss(shape) => write!(f, "loss must be scalar, got shape {shape:?}"),
            Error::NonFiniteGradient(name) if name.is_empty() => f.write_str("non-finite gradient"),
            Error::NonFiniteGradient(name) => write!(f, "non-finite gradient at {name}"),
            Error::NonFiniteLoss { step } => write!(f, "loss diverged (non-finite) at step {step}"),
            Error::NonFiniteParameter(name) => write!(f, "parameter {name} diverged (non-finite)"),
            Error::NonFiniteValue(op) => write!(f, "non-finite input to {op}"),
            Error::GradientCheck(err) => write!(f, "gradient check failed (max relative error {err:e})"),
            Error::AllPositionsMasked => f.write_str("all positions are masked"),
            Error::NothingToDecode => f.write_str("nothing to decode"),
            Error::InvalidSpan { start, end, len } => {
                write!(f, "invalid span ({start},{end}) for sequence of length {len}")
            }
            Error::MissingParameter(name) => write!(f, "missing parameter {name}"),
            Error::Misaligned(what) => write!(f, "misaligned inputs: {what}"),
            Error::InvalidConfig(what) => write!(f, "invalid config: {what}"),
            Error::InvalidVocabulary(what) => write!(f, "invalid vocabulary: {what}"),
            Error::Checkpoint(what) => write!(f, "malformed checkpoint: {what}"),
            Error::InvalidExample(what) => write!(f, "invalid example: {what}"),
        }
    }
}

impl core::error::Error for Error {}
