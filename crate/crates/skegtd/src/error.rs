use thiserror::Error;

/// Errors surfaced by the distribution and estimation routines.
#[derive(Error, Debug, Clone)]
pub enum Error {
    /// A function argument fell outside its mathematical domain.
    #[error("domain error in {context}: {message}")]
    Domain { context: &'static str, message: String },

    /// A requested moment does not exist for the given shape parameters.
    #[error("moment of order {order} does not exist: requires order < alpha*beta = {alpha_beta}")]
    MomentDoesNotExist { order: u32, alpha_beta: f64 },

    /// An iterative computation failed to converge. `partial` carries the
    /// best value reached so far.
    #[error("{context} failed to converge (partial result {partial})")]
    NonConvergence { context: &'static str, partial: f64 },

    /// Sample too small for the requested statistic.
    #[error("insufficient sample for {context}: need at least {needed}, got {got}")]
    InsufficientSample { context: &'static str, needed: usize, got: usize },

    /// No parameter vector in the search box reproduces the sample summaries.
    #[error("non-identifiable sample for {context}: best residual {residual}")]
    NonIdentifiable { context: &'static str, residual: f64 },

    /// A matrix that must be positive definite is not.
    #[error("matrix not positive definite; eigenvalues {eigenvalues:?}")]
    NotPositiveDefinite { eigenvalues: Vec<f64> },

    /// Optimizer exhausted all starts without producing a usable fit.
    #[error("optimization failed in {context}: {message}")]
    OptimFailed { context: &'static str, message: String },

    /// Malformed or unusable input data.
    #[error("data error: {0}")]
    Data(String),

    /// Filesystem / IO trouble, carried as a message so the error stays `Clone`.
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn domain(context: &'static str, message: impl Into<String>) -> Self {
        Error::Domain { context, message: message.into() }
    }

    /// Process exit code class for the CLI contract:
    /// 2 usage, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Data(_) | Error::Io(_) | Error::InsufficientSample { .. } => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
