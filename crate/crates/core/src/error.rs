use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("stability index alpha = {0} outside (0, 2]")]
    InvalidAlpha(f64),

    #[error("stability index alpha = {0} must lie strictly inside (0, 2) for this operation")]
    AlphaNotStrictlyStable(f64),

    #[error("skewness beta = {0} outside [-1, 1]")]
    InvalidBeta(f64),

    #[error("scale sigma = {0} must be positive and finite")]
    InvalidSigma(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("width m = {0} must be at least 2 for the log-rescaled operations")]
    WidthTooSmall(usize),

    #[error("atom direction has norm {0}, not 1 within 1e-12")]
    AtomNotUnit(f64),

    #[error("atom weight {0} is negative or not finite")]
    InvalidWeight(f64),

    #[error("non-finite entry encountered in {0}")]
    NonFinite(&'static str),

    #[error("input set is empty or all-zero")]
    DegenerateInput,

    #[error("input column {index} has norm {norm}, not 1 within 1e-12")]
    ColumnNotUnitNorm { index: usize, norm: f64 },

    #[error("input columns are linearly dependent (rank {rank} < k = {k})")]
    LinearlyDependent { rank: usize, k: usize },

    #[error("matrix is not symmetric: max |a_ij - a_ji| = {0} exceeds 1e-8")]
    NotSymmetric(f64),

    #[error("region enumeration needs k <= {max}, got k = {k}")]
    TooManyRegions { k: usize, max: usize },

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("tail fraction {0} outside (0, 0.05]")]
    InvalidTailFraction(f64),

    #[error("too few tail order statistics: {0}")]
    InsufficientTail(usize),

    #[error(
        "training diverged at step {step} (t = {t}): loss grew from {from} to {to}; \
         reduce dt (current {dt})"
    )]
    Diverged {
        step: usize,
        t: f64,
        from: f64,
        to: f64,
        dt: f64,
    },

    #[error(
        "time step dt = {dt} violates the explicit-Euler stability bound: \
         eta*dt*lambda_max/rescale = {margin} >= 2"
    )]
    UnstableStep { dt: f64, margin: f64 },

    #[error("invalid training configuration: {0}")]
    InvalidTrainConfig(String),

    #[error("i/o failure writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
