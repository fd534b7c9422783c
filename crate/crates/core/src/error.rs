use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not orthogonal (max |VᵀV - I| = {deviation:.3e})")]
    NotOrthogonal { deviation: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("Jacobi sweeps did not converge (off-diagonal residual {residual:.3e})")]
    NoConvergence { residual: f64 },

    #[error("invalid polynomial: {0}")]
    Polynomial(String),

    #[error("component {index} of u lies within {distance:.3e} of the projection kink")]
    NearKink { index: usize, distance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed LMI system: {0}")]
    MalformedLmi(String),

    #[error("step-1 synthesis infeasible (smallest decay rate attempted {eps_decay}, best margin {best_margin:.3e})")]
    StabilizationInfeasible { eps_decay: f64, best_margin: f64 },

    #[error("synthesized gain failed Hurwitz verification (max real part {max_real:.3e} at lambda = {lambda})")]
    HurwitzVerification { lambda: f64, max_real: f64 },

    #[error("anti-windup LMI infeasible at gamma = {gamma} (best max eigenvalue {best_margin:.3e})")]
    AntiWindupInfeasible { gamma: f64, best_margin: f64 },

    #[error("LMI solver stalled after {iterations} iterations (last shift {last_shift:.3e})")]
    SolverStalled { iterations: usize, last_shift: f64 },

    #[error("non-finite derivative in component {index}")]
    NonFinite { index: usize },

    #[error("qp dimension {n} exceeds brute-force limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("L2 check refused: controller initial state is nonzero")]
    NonzeroInitialState,
}

pub type Result<T> = std::result::Result<T, Error>;
