use thiserror::Error;

use crate::solver::Diagnostics;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {value} outside knot domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("invalid patch: {0}")]
    InvalidPatch(String),

    #[error("singular geometry map at (xi, eta) = ({xi}, {eta}): det J = {det:e}")]
    SingularMap { xi: f64, eta: f64, det: f64 },

    #[error("non-positive Jacobian determinant {det:e} at collocation point {index}")]
    InvertedMap { index: usize, det: f64 },

    #[error("collocation matrix of {name} is numerically singular (condition estimate {cond:e})")]
    IllConditioned { name: String, cond: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid boundary specification: {0}")]
    Boundary(String),

    #[error("solver diverged at step {step}: {reason}")]
    Divergence {
        step: usize,
        reason: String,
        last_good: Option<Box<Diagnostics>>,
    },

    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}
