use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma function pole at z = {0}")]
    GammaPole(Complex64),

    #[error("parabolic cylinder evaluation lost accuracy at nu = {nu}, z = {z}: {detail}")]
    AccuracyLoss {
        nu: Complex64,
        z: Complex64,
        detail: String,
    },

    #[error("argument outside the supported range: {0}")]
    OutOfRange(String),

    #[error("field protocol cannot be evaluated at t = {t}: {reason}")]
    FieldDomain { t: f64, reason: String },

    #[error("symmetry violation: cross-block entry {magnitude:e} exceeds {tolerance:e}")]
    SymmetryViolation { magnitude: f64, tolerance: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("step size underflow at tau = {tau}")]
    StepSizeUnderflow { tau: f64 },

    #[error("tolerance not met at tau = {tau} after {steps} steps")]
    ToleranceNotMet { tau: f64, steps: usize },

    #[error("no convergence after {widenings} window widenings (last change {last_delta:e})")]
    NonConvergence { widenings: usize, last_delta: f64 },

    #[error("sweep rate alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("parameter must be non-negative, got {0}")]
    NegativeParameter(f64),

    #[error("state is not normalized (norm^2 = {0})")]
    Normalization(f64),

    #[error("weights must be non-negative and sum to one (sum = {0})")]
    WeightNormalization(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("eigen-decomposition failed: {0}")]
    Eigensolver(String),

    #[error("realization {index}: {source}")]
    Realization {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}
