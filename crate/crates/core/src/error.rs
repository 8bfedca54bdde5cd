//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field contains a non-finite sample")]
    NonFiniteField,
    #[error("grid resolution too low: need n_u >= {needed}, have {actual}")]
    ResolutionTooLow { needed: usize, actual: usize },
    #[error("unsupported derivative order {0} (max {1})")]
    UnsupportedOrder(usize, usize),
    #[error("weight is not Kähler: min curvature density {min_density}")]
    NotKahler { min_density: f64 },
    #[error("weights have different degrees: {0} vs {1}")]
    DegreeMismatch(u32, u32),
    #[error("field layouts or matrix dimensions do not match")]
    DimensionMismatch,
    #[error("Gram matrix is not positive definite")]
    GramNotPositive,
    #[error("fixed-point search did not converge: residual {residual} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("curvature positivity lost at t = {t}")]
    PositivityLost { t: f64 },
    #[error("time step underflow at t = {t} (dt = {dt})")]
    MinStepReached { t: f64, dt: f64 },
    #[error("time {t} outside solved horizon [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },
    #[error("all residuals below floor; fit is degenerate (exact)")]
    DegenerateFit,
    #[error("iteration step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
