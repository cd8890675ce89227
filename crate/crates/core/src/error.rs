use thiserror::Error;

/// Errors raised by precondition violations and failed constructions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("n must be even (got {0})")]
    OddGridSize(usize),
    #[error("n must be at least 16 (got {0})")]
    GridTooCoarse(usize),
    #[error("grid too coarse for the requested stencil (n = {n}, needs {needed} points)")]
    StencilTooWide { n: usize, needed: usize },
    #[error("derivative order {0} not supported (must be 1..=3)")]
    BadDerivativeOrder(usize),
    #[error("accuracy order {0} not supported")]
    BadAccuracyOrder(usize),
    #[error("point {0} lies outside [-pi, pi]")]
    OutOfDomain(f64),
    #[error("input is not mean-free: |mean| = {mean:.3e} exceeds tolerance {tol:.3e}")]
    NotMeanFree { mean: f64, tol: f64 },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("preparation failed: {0}")]
    PreparationFailed(String),
    #[error("cusp construction failed: measured Holder norm {measured:.6} exceeds sigma = {sigma}")]
    ConstructionFailed { measured: f64, sigma: f64 },
    #[error("nu must stay positive (got {0})")]
    NonPositiveNu(f64),
    #[error("decay fit needs at least {needed} samples in the window (found {found})")]
    TooFewSamples { needed: usize, found: usize },
    #[error("decay fit window contains non-positive values")]
    NonPositiveSeries,
    #[error("trajectory too sparse for characteristics tracing: {0}")]
    TrajectoryTooSparse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
