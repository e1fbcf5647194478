use thiserror::Error;

/// Errors produced by the estimation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("dimension mismatch: expected {expected} qubits, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e}, eigenvalue bracket [{lower}, {upper}])")]
    Convergence {
        iterations: usize,
        residual: f64,
        lower: f64,
        upper: f64,
    },

    #[error("infeasible truncation: retained mass {mass} cannot reach infidelity {epsilon}")]
    Infeasible { mass: f64, epsilon: f64 },

    #[error("degenerate anchor: leading weight {0:e} is below the guard threshold")]
    DegenerateAnchor(f64),

    #[error("ill-conditioned interference factor G({row}, {col}) with modulus {modulus:e}")]
    IllConditioned { row: usize, col: usize, modulus: f64 },

    #[error("empty support: all probability mass was rejected")]
    EmptySupport,

    #[error("degenerate variance: every stream has zero single-shot variance")]
    DegenerateVariance,

    #[error("infinite variance: stream `{0}` has nonzero variance but no shots")]
    InfiniteVariance(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable short identifier used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Dimension { .. } => "dimension",
            Error::Domain(_) => "domain",
            Error::Convergence { .. } => "convergence",
            Error::Infeasible { .. } => "infeasible",
            Error::DegenerateAnchor(_) => "degenerate-anchor",
            Error::IllConditioned { .. } => "ill-conditioned",
            Error::EmptySupport => "empty-support",
            Error::DegenerateVariance => "degenerate-variance",
            Error::InfiniteVariance(_) => "infinite-variance",
            Error::Precondition(_) => "precondition",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
