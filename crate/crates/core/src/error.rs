use thiserror::Error;

use crate::composition::Composition;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid composition: {0}")]
    InvalidComposition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ppf `{name}` produced an invalid probability vector at {composition}: {reason}")]
    InvalidPpf {
        name: String,
        composition: Composition,
        reason: String,
    },

    #[error("eppf table has no entry for {0}")]
    MissingEntry(Composition),

    #[error("eppf value at {0} is zero; predictive ratio undefined")]
    DivisionByZero(Composition),

    #[error(
        "recursion is path dependent at {composition}: canonical path gives {canonical:e}, \
         alternate path gives {alternate:e}"
    )]
    PathDependent {
        composition: Composition,
        canonical: f64,
        alternate: f64,
    },

    #[error("weight truncation needs more than {cap} atoms")]
    TruncationOverflow { cap: usize },

    #[error("cannot pick {requested} distinct atoms from a draw with {available}")]
    Exhausted { requested: usize, available: usize },

    #[error("size-biased prefix has {available} picks, composition needs {required}")]
    InsufficientPrefix { required: usize, available: usize },

    #[error("all importance weights underflowed (max log-weight {max_log_weight})")]
    DegenerateWeights { max_log_weight: f64 },

    #[error("composition total {total} exceeds the depth guard {cap}")]
    CompositionTooDeep { total: usize, cap: usize },

    #[error("invalid membership sequence: {0}")]
    InvalidMembership(String),

    #[error("chain is empty")]
    EmptyChain,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
