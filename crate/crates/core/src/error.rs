use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("eigenvalue iteration did not converge")]
    EigenNonConvergence,

    #[error("Lyapunov equation requires spectral radius < 1, got {rho}")]
    LyapunovUnstable { rho: f64 },

    #[error("ill-conditioned solve: residual {residual:e} exceeds bound {bound:e}")]
    IllConditioned { residual: f64, bound: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("state overflow at step {step}")]
    Overflow { step: usize },

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("target set does not contain the origin")]
    TargetExcludesOrigin,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no drift radius found below cap {cap}")]
    ScanFailed { cap: f64 },

    #[error("sampling region is empty at level {level}")]
    EmptyRegion { level: f64 },

    #[error("rejection sampling acceptance rate {rate:e} below 1e-6")]
    LowAcceptance { rate: f64 },

    #[error("insufficient data: {usable} usable points, need at least {required}")]
    InsufficientData { usable: usize, required: usize },

    #[error("candidate is not radially unbounded: {0}")]
    NotRadiallyUnbounded(String),

    #[error("ill-conditioned invariant subspace split (condition {condition:e})")]
    SubspaceSplit { condition: f64 },
}
