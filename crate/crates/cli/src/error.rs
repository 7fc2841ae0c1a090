use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: String, source: serde_json::Error },
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("config describes a `{found}` experiment; this subcommand runs `{expected}`")]
    WrongKind { expected: &'static str, found: &'static str },
    #[error(transparent)]
    Core(#[from] rwre_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("need at least {required} distinct abscissae, got {got}")]
    TooFewPoints { got: usize, required: usize },
    #[error("column `{0}` not found")]
    MissingColumn(String),
}
