use thiserror::Error;

pub type Result<T, E = XntError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XntError {
    /// Malformed or out-of-contract input.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Argument outside the domain of an otherwise well-defined map (e.g. dlog of 0).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// The object degenerates in a way the operation cannot handle (h' = 0, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("evaluation budget exceeded: {needed} evaluations requested, budget is {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    /// A checked mathematical invariant failed at runtime.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl XntError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        XntError::InvalidInput(msg.into())
    }
}

/// Default cap on polynomial evaluations per scan.
pub const DEFAULT_BUDGET: u128 = 100_000_000;

pub(crate) fn check_budget(needed: u128, budget: u128) -> Result<()> {
    if needed > budget {
        Err(XntError::Budget { needed, budget })
    } else {
        Ok(())
    }
}
