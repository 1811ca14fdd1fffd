use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid word: {0}")]
    InvalidWord(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("budget exceeded: {what} needs {needed}, cap is {cap}")]
    BudgetExceeded { what: &'static str, needed: u128, cap: u128 },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("logarithm of a nonpositive number")]
    NonPositiveArgument,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not found within budget: {0}")]
    NotFound(String),

    #[error("epsilon too large: the band [eps, 1-eps] is empty")]
    EpsilonTooLarge,

    #[error("word depth {depth} exceeds sequence length {len}")]
    DepthExceedsSequence { depth: usize, len: usize },

    #[error("depth insufficient: {0}")]
    DepthInsufficient(String),

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("precision insufficient: {0}")]
    PrecisionInsufficient(String),

    #[error("certificate rejected: {0}")]
    Rejected(String),
}

pub type Result<T> = std::result::Result<T, Error>;
