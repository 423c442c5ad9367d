use thiserror::Error;

/// Every failure the numerical pipeline can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field dimensions do not match: {0}")]
    DimensionMismatch(String),
    #[error("degenerate area element at grid point {index}")]
    DegenerateAreaElement { index: usize },
    #[error("incompatible right-hand side (mean {mean:e})")]
    IncompatibleRhs { mean: f64 },
    #[error("degenerate immersion: det g <= 0 at grid point {index}")]
    DegenerateImmersion { index: usize },
    #[error("not a closed genus-1 metric: total curvature {total:e}")]
    NotGenusOneMetric { total: f64 },
    #[error("uniformization failed after {iterations} iterations (residual {residual:e})")]
    UniformizationFailed { iterations: usize, residual: f64 },
    #[error("conformal structure ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("invalid Teichmueller point: imaginary part must be positive")]
    InvalidTeichmullerPoint,
    #[error("expected a constant-coefficient flat metric")]
    NonConstantMetric,
    #[error("invalid: vanishing tracefree form")]
    VanishingTracefreeForm,
    #[error("cannot build correction basis: {0}")]
    CannotBuildBasis(String),
    #[error("correction diverged: {0}")]
    CorrectionDiverged(String),
    #[error("singular correction Jacobian; use the degenerate path")]
    SingularJacobian,
    #[error("IFT hypotheses fail: {0}")]
    IftHypotheses(String),
    #[error("fixed point failed: {0}")]
    FixedPointFailed(String),
    #[error("root bracketing failed: {0}")]
    RootBracketing(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
}

pub type Result<T> = std::result::Result<T, Error>;
