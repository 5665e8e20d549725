use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("vertical-only geodesic (a = 0): the moving frame is undefined")]
    VerticalOnly,
    #[error("non-finite state at step {step} (t = {t})")]
    BlowUp { step: usize, t: f64 },
    #[error("custom curvature profile returned a non-symmetric matrix (asymmetry {0:e})")]
    AsymmetricProfile(f64),
    #[error("custom curvature profile returned a {got}x{got} matrix, expected {expected}x{expected}")]
    ProfileDimension { got: usize, expected: usize },
    #[error("curvature profile must vanish on frame rows/columns 0 and 1")]
    ProfileLeadingBlock,
    #[error("quadrature grid too coarse: Richardson estimate {estimate:e} exceeds {tol:e}")]
    CoarseGrid { estimate: f64, tol: f64 },
    #[error("{0} sample failures exceed the 1% budget")]
    SampleFailures(usize),
    #[error("no solution of the shooting equation: {0}")]
    Shooting(String),
    #[error("identity residual {residual:e} exceeds tolerance {tol:e} in {what}")]
    Residual { what: String, residual: f64, tol: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
