use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    Numeric(String),

    #[error("invalid decoding profile: {0}")]
    Profile(String),

    #[error("capacity exceeded: {what} supports at most {bound}, got {got}")]
    Capacity {
        what: &'static str,
        bound: usize,
        got: usize,
    },

    #[error("cannot build relaxation: {0}")]
    Build(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
