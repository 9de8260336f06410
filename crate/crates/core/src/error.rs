use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("partitions live on different pair universes")]
    UniverseMismatch,
    #[error("walk length must be at least 2, got {0}")]
    WalkLength(usize),
    #[error("enumeration needs {needed} steps, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("grid needs at least 3 columns, got {0}")]
    GridTooSmall(usize),
    #[error("({0}, {1}) is not an edge of the base graph")]
    NotABaseEdge(usize, usize),
    #[error("map inverts only part of the pairs over base edge ({0}, {1})")]
    InconsistentTwist(usize, usize),
    #[error("map is not a bijection: {0}")]
    NotBijective(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("formula error: {0}")]
    Formula(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("evaluation budget exhausted")]
    EvalBudget,
    #[error("the two graphs are not distinguished")]
    NotDistinguished,
    #[error("deadline exceeded")]
    Timeout,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
