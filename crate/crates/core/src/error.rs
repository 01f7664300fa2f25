use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("z-arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("q-truncation mismatch: {0} vs {1}")]
    TruncationMismatch(u32, u32),
    #[error("malformed rational {0:?}")]
    BadRational(String),
    #[error("malformed series JSON: {0}")]
    BadSeries(String),
    #[error("invalid surface model: {0}")]
    BadModel(String),
    #[error("unknown line bundle {0:?}")]
    UnknownLineBundle(String),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("singular Gram block at weight {0}")]
    SingularGram(usize),
    #[error(
        "G_{k} inadmissible for this class ({reason}): the operator involves the \
         unknown constants g_{{1,lambda}} and g_{{2,lambda}}"
    )]
    Inadmissible { k: usize, reason: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("underdetermined: {0}")]
    Underdetermined(String),
    #[error("chi-extrapolation needs {needed} distinct samples at q^{q_exp}, got {got}")]
    InsufficientSamples { q_exp: u32, needed: usize, got: usize },
    #[error("chi-extrapolation degree bound violated at q^{q_exp} (sample chi={chi})")]
    DegreeBoundViolated { q_exp: u32, chi: i64 },
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
