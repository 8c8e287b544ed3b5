use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid distribution parameters: {0}")]
    InvalidParameters(String),
    #[error("distribution is not monotone decreasing at index {index} ({prev} -> {next})")]
    NonMonotone { index: usize, prev: f64, next: f64 },
    #[error("distribution has a negative or non-finite value {value} at index {index}")]
    InvalidValue { index: usize, value: f64 },
    #[error("grid mismatch: {0} vs {1} points")]
    GridMismatch(usize, usize),
    #[error("profile needs at least two buyers, got {0}")]
    TooFewBuyers(usize),
    #[error("buyer index {0} out of range")]
    BuyerIndex(usize),
    #[error("second-price auction with random quantile reserve requires a reserve draw")]
    MissingReserveDraw,
    #[error("bid {0} lies outside the support [{1}, {2}]")]
    OutsideSupport(f64, f64, f64),
    #[error("virtual-efficient rule violates truthfulness constraints: {0}")]
    NonTruthfulRule(String),
    #[error("target level {level} exceeds the monopoly revenue {max}")]
    TargetAboveMonopoly { level: f64, max: f64 },
    #[error("no root: {0}")]
    NoRoot(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
