use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid system size {n}: {reason}")]
    InvalidSize { n: usize, reason: &'static str },

    #[error("site index {index} out of range for {n} sites")]
    IndexError { index: usize, n: usize },

    #[error("configuration has {got} sites but the graph has {expected}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("coupling graph is disconnected (site {site} unreachable)")]
    DisconnectedGraph { site: usize },

    #[error("{n} sites exceeds the supported limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("neighbour count k={k} must satisfy 1 < k < {n}")]
    InvalidK { k: usize, n: usize },

    #[error("distance {0} is not strictly positive")]
    InvalidDistance(f64),

    #[error("Lanczos did not converge after {iterations} iterations (best residuals {residuals:?})")]
    ConvergenceFailure { iterations: usize, residuals: Vec<f64> },

    #[error("all {0} computed levels are degenerate with the ground state")]
    ManifoldNotExited(usize),

    #[error("state norm deviates from 1 by {0:e}")]
    NotNormalized(f64),

    #[error("momentum {0} is not on the grid 2*pi*m/n")]
    InvalidMomentum(f64),

    #[error("curves do not cross on the grid")]
    NoCrossing,

    #[error("curves cross more than once: {0:?}")]
    AmbiguousCrossing(Vec<f64>),

    #[error("fit window holds too few points ({got} < {need})")]
    WindowTooNarrow { got: usize, need: usize },

    #[error("gap {0} is not strictly positive")]
    InvalidGap(f64),

    #[error("need at least {need} size pairs, got {got}")]
    InsufficientPairs { got: usize, need: usize },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("displacement h={0} must be non-negative")]
    InvalidDisplacement(f64),

    #[error("atoms {0} and {1} coincide")]
    DegenerateGeometry(usize, usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
