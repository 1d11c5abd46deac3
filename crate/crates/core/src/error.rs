use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("{what} needs {needed} units but the budget allows {cap}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        cap: u128,
    },
    #[error("challenge has zero marginal probability")]
    ZeroProbabilityChallenge,
    #[error("sub-algorithm {index} exceeded its query budget {budget}")]
    QueryBudgetViolation { index: usize, budget: usize },
    #[error("schedule violation: database holds {size} entries after {queries} queries")]
    ScheduleViolation { size: usize, queries: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidSpec(msg.into()))
}
