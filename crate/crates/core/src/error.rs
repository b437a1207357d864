use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("index out of range: {0}")]
    Index(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: field `{field}` {constraint}")]
    Config { field: &'static str, constraint: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("matrix cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EngineError {
    pub(crate) fn config(field: &'static str, constraint: impl Into<String>) -> Self {
        EngineError::Config {
            field,
            constraint: constraint.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, EngineError>;
