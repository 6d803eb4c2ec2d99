use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("underdetermined fix: {available} measurements, need at least {required}")]
    Underdetermined { available: usize, required: usize },

    #[error("degenerate filter at epoch {epoch}: {detail}")]
    Degenerate { epoch: u64, detail: String },

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("map parse error on line {line}: {reason}")]
    MapParse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
