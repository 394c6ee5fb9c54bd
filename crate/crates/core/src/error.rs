use thiserror::Error;

/// Errors raised across the simulator, agent and experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("invalid state: {0}")]
    State(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user input (config, dimensions) rather than a runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Toml(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
