use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("non-finite log-moment at t = {t}")]
    NonFinite { t: f64 },
    #[error("law is in the wrong regime: {0}")]
    WrongRegime(String),
    #[error("tree went extinct in all {attempts} attempts")]
    ExtinctionBudgetExceeded { attempts: u32 },
    #[error("tree is not available to depth {requested} (have {available})")]
    DepthUnavailable { requested: u32, available: u32 },
    #[error("exploration budget of {budget} vertices exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("only {hits} hits, {required} required")]
    InsufficientHits { hits: u64, required: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("serialization: {0}")]
    Serialization(String),
}
