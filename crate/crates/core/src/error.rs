use thiserror::Error;

/// Errors raised by the solvers, channel models and the benchmark harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lattice basis is numerically singular (|det| = {det:e}, bound = {bound:e})")]
    SingularBasis { det: f64, bound: f64 },

    #[error("LLL exceeded its swap cap of {cap} (numerical breakdown)")]
    NonConvergence { cap: usize },

    #[error("dimension {dim} exceeds the brute-force limit of {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Gram matrix is singular or ill-conditioned (condition number {cond:e})")]
    SingularGram { cond: f64 },

    #[error("coupling matrix is singular")]
    SingularCoupling,

    #[error("coupling matrix is not symmetric positive definite")]
    NonSpdCoupling,

    #[error("precoder direction D*A is the zero matrix")]
    ZeroPrecoder,

    #[error("channel estimation requested with perfect CSI")]
    PerfectCsiNoOp,

    #[error("input must be strictly positive: {0}")]
    NonPositiveInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
