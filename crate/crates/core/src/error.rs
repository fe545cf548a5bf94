use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state space: {0}")]
    InvalidSpace(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("tilted distribution has zero unnormalized mass")]
    UnnormalizableTilt,
    #[error("support violation: first distribution has mass at state {0} where the second has none")]
    SupportViolation(usize),
    #[error("conditional rate is positive where the unguided rate vanishes (state {from} -> {to})")]
    IncompatibleSupports { from: usize, to: usize },
    #[error("dimension mismatch: expected D = {expected}, got D = {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("state spaces differ")]
    SpaceMismatch,
    #[error("sampled distribution drifted from unit mass by {0:e}")]
    NormalizationDrift(f64),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("guided class has empty support")]
    EmptyClassSupport,
    #[error("all limiting region weights vanish")]
    DegenerateLimit,
    #[error("restriction set carries zero mass")]
    EmptyRestriction,
    #[error("uniformization needs about {needed:e} terms, over the budget of {budget}")]
    TermBudget { needed: f64, budget: usize },
    #[error("integration step too coarse: entry {value:e} at t = {time}")]
    StepTooCoarse { value: f64, time: f64 },
    #[error("particle exceeded {limit} events")]
    EventOverflow { limit: usize },
    #[error("particle stuck at non-terminal state {0} with zero exit rate")]
    DeadEnd(usize),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
