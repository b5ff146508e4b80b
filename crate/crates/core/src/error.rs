use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} modes, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("argument {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("bound precondition violated: {constraint}")]
    Precondition { constraint: String },

    #[error("rerun budget of {budget} attempts exhausted; alpha_out is too small for this channel")]
    BudgetExhausted { budget: u32 },

    #[error("promise violated: expected 0 or {promised} intersections, found {actual}")]
    PromiseViolation { promised: usize, actual: usize },

    #[error("no feasible parameter point: {0}")]
    Infeasible(String),

    #[error("encode error: {0}")]
    Encode(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("transport failure: {0}")]
    Transport(String),

    #[error("protocol desync: {0}")]
    Desync(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by invalid caller input rather than by a run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension { .. }
                | Error::Parameter { .. }
                | Error::Domain { .. }
                | Error::Precondition { .. }
                | Error::Infeasible(_)
        )
    }
}
