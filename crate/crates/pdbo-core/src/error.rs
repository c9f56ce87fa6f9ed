use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point lies outside the feasible set (distance {distance:e})")]
    Infeasible { distance: f64 },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("degenerate feasible set (zero diameter)")]
    DegenerateSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite {what} at x={x:?}, y={y:?}")]
    NonFinite { what: &'static str, x: Vec<f64>, y: Vec<f64> },

    #[error("non-finite input to {0}")]
    NonFiniteInput(&'static str),

    #[error("baseline requires second-order callbacks ({0} missing)")]
    MissingHvp(&'static str),

    #[error("inner solve did not reach tolerance {tolerance:e} within {cap} iterations")]
    IterationCap { cap: usize, tolerance: f64 },

    #[error("missing reference for {0}")]
    MissingReference(&'static str),

    #[error("rate slope needs positive values (got {0})")]
    NonPositive(f64),

    #[error("rate slope needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("csv {path}, row {row}: {message}")]
    Csv { path: String, row: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("iteration {iteration}: {source}")]
    AtIteration { iteration: usize, source: Box<Error> },

    #[error("subproblem {k}: {source}")]
    AtSubproblem { k: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration { iteration, source: Box::new(self) }
    }

    pub(crate) fn at_subproblem(self, k: usize) -> Self {
        Error::AtSubproblem { k, source: Box::new(self) }
    }
}
