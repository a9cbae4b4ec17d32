use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid model: {}", join(.0))]
    InvalidModel(Vec<Violation>),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("targets must be absorbing (state {0} is not)")]
    TargetsNotAbsorbing(usize),
    #[error("targets are not nested (T_{0} is not a subset of T_{1})")]
    NotNested(usize, usize),
    #[error("strategy is not chain-representable: {0}")]
    NotChainRepresentable(String),
    #[error("mixed-sign shortest path is undecidable; rejected (negative weight on action `{action}` of state {state})")]
    NegativeWeight { state: usize, action: String },
    #[error("precise discounted sum is not supported; use a positive epsilon")]
    PreciseDiscountedSum,
    #[error("undefined average over an empty prefix")]
    UndefinedAverage,
    #[error("malformed linear program: {0}")]
    MalformedLp(String),
    #[error("singular linear system")]
    Singular,
    #[error("subset oracle is not downward closed at MEC {mec}")]
    NotDownwardClosed { mec: usize },
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("{context}: {message}")]
    Parse { context: String, message: String },
    #[error("instance too large: {0}")]
    TooLarge(String),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
