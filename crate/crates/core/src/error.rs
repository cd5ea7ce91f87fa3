use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("value {value} outside tabulated range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("z = {re} + {im}i is outside the holomorphy region Re z > {bound}")]
    Domain { re: f64, im: f64, bound: f64 },

    #[error("quadrature did not reach the requested accuracy (residual {residual:e})")]
    Accuracy { residual: f64 },

    #[error("|1 - K̃| fell to {margin:e} on the contour (required {required:e})")]
    Stability { margin: f64, required: f64 },

    #[error("contour truncation tail estimate {estimate:e} exceeds {tolerance:e}")]
    Truncation { estimate: f64, tolerance: f64 },

    #[error("implicit step is singular: |1 - dt·K(0)/2| = {0:e}")]
    StepSize(f64),

    #[error("non-finite values after step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },

    #[error("mass fraction {fraction:e} near the velocity boundary exceeds {limit:e} at t = {time}")]
    BoundaryMass { fraction: f64, limit: f64, time: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
