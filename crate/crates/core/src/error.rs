use thiserror::Error;

use crate::fem::FieldVector;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate DLN coefficients: {0}")]
    DegenerateCoefficients(String),

    #[error("numerical failure at {location}: {message}")]
    NumericalFailure { location: String, message: String },

    #[error("sparse Cholesky factorization failed: {0}")]
    Decomposition(String),

    #[error("fixed-point iteration did not converge in {iterations} iterations (last increment {increment:.3e})")]
    Convergence {
        iterations: usize,
        increment: f64,
        last_iterate: Box<FieldVector>,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("predictor history not ready: {0}")]
    NotReady(String),

    #[error("step size {step:.3e} fell below the floor k_min = {k_min:.3e} at t = {time:.6}")]
    StepFloor { step: f64, k_min: f64, time: f64 },

    #[error("step at t = {time:.6} rejected {rejections} times")]
    TooManyRejections { rejections: usize, time: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
