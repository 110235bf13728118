use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::harness::EtaResult;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("outside the supported domain: {0}")]
    Domain(String),

    #[error("quadrature did not converge: coarse value {coarse}, refined value {fine}")]
    Accuracy { coarse: f64, fine: f64 },

    #[error("{diverged} of {replicas} replicas produced non-finite states (limit is 0.1%); first at step {first_step}")]
    Divergence {
        diverged: usize,
        replicas: usize,
        first_step: usize,
    },

    #[error("horizon too short: {0}")]
    Horizon(String),

    #[error("model evaluation failed at {point:?}: {reason}")]
    Diagnostic { point: Vec<f64>, reason: String },

    #[error("rate study stopped at eta = {eta}: {cause}")]
    Study {
        eta: f64,
        completed: Vec<EtaResult>,
        cause: Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}
