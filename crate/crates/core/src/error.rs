use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid body: {0}")]
    InvalidBody(String),
    #[error("singular linear map (|det| = {0:e})")]
    Singular(f64),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("resource budget exceeded: {what} needs {needed}, budget is {budget}")]
    Budget { what: &'static str, needed: u64, budget: u64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("unknown family `{0}` (valid: {1})")]
    UnknownFamily(String, String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
