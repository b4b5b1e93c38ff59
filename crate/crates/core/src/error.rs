use crate::spaces::Violation;

/// Errors raised by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Structurally invalid input: wrong shapes, NaN entries, unknown indices.
    #[error("malformed input: {0}")]
    Malformed(String),

    /// A distance matrix failed one of the metric axioms.
    #[error("metric axiom violated: {0}")]
    Metric(Violation),

    /// Two objects that must live on the same space do not.
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    /// A mass condition (probability, subprobability, domination) failed.
    #[error("mass condition violated: {0}")]
    Mass(String),

    /// The inputs are well formed but violate an operation's precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A linear program that must be feasible and bounded was not.
    #[error("linear program {0}")]
    Lp(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::Malformed(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// True for errors caused by unparsable or structurally broken input.
    pub fn is_malformed(&self) -> bool {
        matches!(self, Error::Malformed(_) | Error::Json(_) | Error::SpaceMismatch(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
