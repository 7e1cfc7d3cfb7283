use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("invalid bounds: lower {lower} must be < upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("autoregressive coefficient {rho} is not stationary (|rho| must be < 1)")]
    NonStationary { rho: f64 },
    #[error("degrees of freedom {nu} must be > 2")]
    BadDof { nu: f64 },
    #[error("grid of {sites} sites exceeds the limit of {limit}")]
    GridTooLarge { sites: usize, limit: usize },
    #[error("field has zero variance")]
    DegenerateField,
    #[error("{transform}: value {value} outside domain ({lo}, {hi})")]
    Domain {
        transform: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid moments: exp(m2) = {second} must exceed m1^2 = {first_sq}")]
    InvalidMoments { second: f64, first_sq: f64 },
    #[error("parameter outside the simulator domain: {0}")]
    SimulatorDomain(String),
    #[error("series length {t} exceeds training length {t_k}")]
    Length { t: usize, t_k: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping iteration context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Iteration { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
