use thiserror::Error;

/// Error variants shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Point or state dimension does not match the expected one.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A problem exceeds a documented size limit.
    #[error("capacity exceeded: {what} = {got} exceeds limit {limit}")]
    Capacity {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    /// The ODE state became non-finite during integration.
    #[error("numerical blow-up at step {step}: non-finite state{}", context_suffix(.context))]
    NumericalBlowUp { step: usize, context: Option<usize> },

    /// Operation requires a kernel family the given kernel does not belong to.
    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(&'static str),

    /// The exact transport solver failed to certify optimality.
    #[error("transport solver failure: {0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

fn context_suffix(context: &Option<usize>) -> String {
    match context {
        Some(idx) => format!(" (sample {idx})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach an ensemble sample index to a blow-up error.
    pub(crate) fn with_sample(self, idx: usize) -> Self {
        match self {
            Error::NumericalBlowUp { step, .. } => Error::NumericalBlowUp {
                step,
                context: Some(idx),
            },
            other => other,
        }
    }
}
