use thiserror::Error;

use crate::model::{Action, SystemState};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("invalid state {0}: {1}")]
    InvalidState(SystemState, String),

    #[error("action {action} is not feasible in state {state}")]
    InfeasibleAction { state: SystemState, action: Action },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("relative value iteration did not converge after {iterations} iterations (span {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.position() {
            Some(pos) if !e.is_io_error() => Error::Parse {
                line: pos.line() as usize,
                msg: e.to_string(),
            },
            _ => Error::Io(std::io::Error::other(e)),
        }
    }
}
