use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    ModelInvalid(String),

    #[error("hypothesis {id} violated at u = {u}: {detail}")]
    HypothesisViolation { id: String, u: f64, detail: String },

    #[error("invalid characteristic context: {0}")]
    InvalidContext(String),

    #[error("no real roots: speed {c} does not exceed the critical speed {c_star}")]
    NoRoots { c: f64, c_star: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations (last sup-difference {last_diff:e})")]
    NonConvergence {
        iterations: usize,
        last_diff: f64,
        trace: Vec<f64>,
    },

    #[error("simulation failure: {0}")]
    SchemeFailure(String),

    #[error("internal invariant failed: {0}")]
    Internal(String),
}
