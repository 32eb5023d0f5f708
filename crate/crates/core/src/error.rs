use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: left is {left:?}, right is {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("no {entity} feature row for id `{id}`")]
    MissingFeatures { entity: &'static str, id: String },

    #[error("item id `{0}` appears in both domains; item ids must be disjoint")]
    OverlappingItem(String),

    #[error("unknown domain `{0}`")]
    UnknownDomain(String),

    #[error(
        "orthogonal projection did not converge after {iterations} iterations \
         (residual {residual:.3e}); re-initialize the mapping"
    )]
    ProjectionDiverged { iterations: usize, residual: f64 },

    #[error("transfer rate alpha = 0.5 makes the dual reduction singular")]
    SingularReduction,

    #[error("convergence condition ({0}) does not hold; apply the positive perturbation first")]
    ConditionViolated(char),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("model file: {0}")]
    Model(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
