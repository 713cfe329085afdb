use thiserror::Error;

use crate::solver::SvmModel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no samples")]
    NoSamples,

    #[error("unsupported multiclass data: {0} distinct labels")]
    Multiclass(usize),

    #[error("both classes must be present")]
    SingleClass,

    #[error("empty point set: covariance needs at least one point")]
    EmptyCluster,

    #[error("ill-conditioned covariance: still not positive definite at eps = {eps:e}")]
    IllConditioned { eps: f64 },

    #[error("linear algebra failure: {0}")]
    LinAlg(String),

    #[error("solver stopped after {iterations} iterations with KKT violation {violation:e}")]
    NotConverged {
        iterations: usize,
        violation: f64,
        best: Box<SvmModel>,
    },

    #[error("{count} cross-validation fits stopped at the cap of {max_iter} iterations")]
    CvNotConverged { count: usize, max_iter: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
