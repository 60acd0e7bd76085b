use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max |M - M^H| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("state is not normalized (sum of squared Schmidt coefficients = {0})")]
    NotNormalized(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),
    #[error("invalid quantum model: {0}")]
    InvalidModel(String),
    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),
    #[error("signaling detected: {party} marginal differs by {deviation:.3e} between inputs of the other party")]
    SignalingDetected { party: char, deviation: f64 },
    #[error("threshold {threshold} outside the range spanned by the two behaviors ({low}, {high})")]
    ThresholdOutsideRange { threshold: f64, low: f64, high: f64 },
    #[error("quantum maximum must be positive (got {0})")]
    MaxNotPositive(f64),
    #[error("scenario too large to enumerate: {0} strategies")]
    TooLarge(u128),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("no strictly feasible point: {0}")]
    NoStrictlyFeasiblePoint(String),
    #[error("all see-saw restarts failed: {0}")]
    AllRestartsFailed(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError { line: usize, column: usize, message: String },
    #[error("incomplete table: missing {missing} cell(s), first at x={x}, y={y}, a={a}, b={b}")]
    IncompleteTable { missing: usize, x: usize, y: usize, a: usize, b: usize },
    #[error("block (x={x}, y={y}) sums to zero")]
    ZeroBlock { x: usize, y: usize },
    #[error("count table has no totals: normalized tables need assumed_total_per_setting")]
    MissingTotals,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
