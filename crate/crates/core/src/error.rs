use thiserror::Error;

/// Errors raised by the samplers, generators and the workflow driver.
#[derive(Debug, Error)]
pub enum SlimError {
    #[error("invalid hyperparameter `{name}`: {reason}")]
    Hyperparameter { name: &'static str, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("variable `{name}` (row {index}) has zero variance over its observed entries")]
    ConstantVariable { index: usize, name: String },

    #[error("non-finite value in `{component}` at sweep {sweep}")]
    NonFinite {
        sweep: usize,
        component: &'static str,
    },

    #[error("matrix is not positive definite after jitter ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SlimError>;

impl SlimError {
    pub(crate) fn hyper(name: &'static str, reason: impl Into<String>) -> Self {
        SlimError::Hyperparameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            SlimError::Hyperparameter { .. } => "hyperparameter",
            SlimError::InvalidArgument(_) => "invalid_argument",
            SlimError::Dimension(_) => "dimension",
            SlimError::ConstantVariable { .. } => "constant_variable",
            SlimError::NonFinite { .. } => "non_finite",
            SlimError::NotPositiveDefinite { .. } => "not_positive_definite",
            SlimError::Empty(_) => "empty",
            SlimError::Io { .. } => "io",
            SlimError::Csv(_) => "csv",
            SlimError::Json(_) => "json",
        }
    }
}
