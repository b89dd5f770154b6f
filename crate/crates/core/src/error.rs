use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-side precondition was violated.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("net budget exceeded: construction needs M = 2^{log2_m:.3} centers, budget is {m_max}")]
    BudgetExceeded { log2_m: f64, m_max: u64 },

    #[error("ambient dimension too small: truncation needs d = {required}, ambient has {available}")]
    AmbientTooSmall { required: u64, available: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An invariant the library relies on did not hold.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    /// True for errors caused by bad input rather than a broken invariant.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Usage(_)
                | Error::BudgetExceeded { .. }
                | Error::AmbientTooSmall { .. }
                | Error::Degenerate(_)
                | Error::Parse(_)
                | Error::Io(_)
        )
    }
}
