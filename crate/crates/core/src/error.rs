use thiserror::Error;

/// Every fallible operation in the crate reports through this type.
#[derive(Debug, Error)]
pub enum StrobeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("mismatched spaces: {0}")]
    MismatchedSpaces(String),
    #[error("factorization failed: {0}")]
    FactorizationFailure(String),
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("dry state (h <= 0) at {0}")]
    DryState(String),
    #[error("degenerate map: {0}")]
    DegenerateMap(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Last iterate, kept so callers can inspect or restart.
        last: Option<Vec<f64>>,
    },
    #[error("ill-posed data: {0}")]
    IllPosedData(String),
    #[error("test space not inf-sup stable: {0}")]
    NotInfSupStable(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<StrobeError>,
    },
}

impl StrobeError {
    /// Process exit code: 2 configuration, 3 nonconvergence, 4 I/O, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            StrobeError::Config(_) | StrobeError::InvalidArgument(_) => 2,
            StrobeError::NonConvergence { .. } => 3,
            StrobeError::Io(_) | StrobeError::Format(_) => 4,
            StrobeError::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

/// Tags an error with the pipeline stage it came from.
pub fn in_stage<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ StrobeError::Stage { .. } => e,
        e => StrobeError::Stage { stage, source: Box::new(e) },
    })
}

pub type Result<T> = std::result::Result<T, StrobeError>;

impl From<serde_json::Error> for StrobeError {
    fn from(e: serde_json::Error) -> Self {
        StrobeError::Format(e.to_string())
    }
}

impl From<csv::Error> for StrobeError {
    fn from(e: csv::Error) -> Self {
        StrobeError::Format(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> StrobeError {
    StrobeError::InvalidArgument(msg.into())
}
