use thiserror::Error;

/// Errors raised by the spectral and time-stepping routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("hermite truncation must keep at least {min} modes, got {got}")]
    TruncationTooSmall { min: usize, got: usize },

    #[error("coefficient vector has {got} modes but the basis expects {expected}")]
    BasisMismatch { expected: usize, got: usize },

    #[error("wavenumber must be positive, got {0}")]
    NonPositiveWavenumber(f64),

    #[error("epsilon must lie in [0, 1), got {0}")]
    EpsilonOutOfRange(f64),

    #[error("resolvent requested at Re(lambda) = {0}, outside the invertibility region Re(lambda) > -1")]
    OutsideResolventRegion(f64),

    #[error("restricted resolvent system is numerically singular at lambda = {re} + {im}i")]
    SingularResolvent { re: f64, im: f64 },

    #[error("no fluid branch: eps*(1+s) = {value} exceeds the threshold {threshold}")]
    NoFluidBranch { value: f64, threshold: f64 },

    #[error("dispersion fixed point did not converge after {iters} iterations (last step {last_step:e})")]
    FixedPointDiverged { iters: usize, last_step: f64 },

    #[error("eigenvector self-pairing {0:e} is too close to zero to normalize")]
    DegeneratePairing(f64),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("net charge at the zero Fourier mode is {0:e}; the Poisson problem needs a neutral density")]
    NonNeutral(f64),

    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    StabilityBound { dt: f64, bound: f64 },

    #[error("non-finite value detected at t = {t}: {what}")]
    NonFinite { t: f64, what: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
