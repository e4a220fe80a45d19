use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("array length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("the bidirectional model needs an explicit emitter chain")]
    ChainRequired,

    #[error("steady state not reached: residual {residual:e} at t = {t}")]
    NonConvergence { residual: f64, t: f64 },

    #[error("non-convergence in cumulant block for site {site}: residual {residual:e}")]
    BlockNonConvergence { site: usize, residual: f64 },

    #[error("NaN or Inf encountered at t = {t}")]
    NumericalInstability { t: f64 },

    #[error("no real root of the Dicke cubic in [-1, 0]")]
    NoPhysicalRoot,

    #[error("{n} emitters exceeds the cap of {cap}")]
    DimensionCap { n: usize, cap: usize },

    #[error("argument is NaN")]
    NanArgument,

    #[error("sites {0} and {0} coincide; same-site products are not correlations")]
    SameSite(usize),

    #[error("site index {index} out of range for {n} emitters")]
    SiteOutOfRange { index: usize, n: usize },

    #[error("solution is not converged")]
    NotConverged,
}

pub type Result<T> = std::result::Result<T, Error>;
