use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Every invariant violation found while validating a scenario.
    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),

    #[error("head index {head} out of range for {users} users")]
    HeadOutOfRange { head: usize, users: usize },

    #[error("item {item} has no dissemination (empty link set)")]
    UndefinedDissemination { item: usize },

    #[error("allocation does not match dissemination plan: {0}")]
    AllocationMismatch(String),

    #[error("negative amount {0}")]
    NegativeAmount(f64),

    #[error("energy budget exhausted: consumption {energy} J >= budget {budget} J")]
    BudgetExhausted { energy: f64, budget: f64 },

    #[error("utility of user {user} is negative ({value})")]
    InfeasibleUtility { user: usize, value: f64 },

    #[error("no candidate head admits an agreement (disagreement point)")]
    NoAgreement,

    #[error("{dims} allocation variables exceed the oracle limit of {max}")]
    DimensionTooLarge { dims: usize, max: usize },

    #[error("allocation is infeasible: {0}")]
    InfeasibleAllocation(String),

    #[error("user {user} has zero utility at the reference solution")]
    ZeroUtility { user: usize },

    #[error("invalid option: {0}")]
    InvalidOption(String),
}
