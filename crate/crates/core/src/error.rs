use thiserror::Error;

/// Errors raised by model construction, sampling and the study runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidProbs(String),
    #[error("invalid cut-points: {0}")]
    InvalidCutpoints(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("unknown prior identifier `{0}`")]
    UnknownPrior(String),
    #[error("sampler failure: {0}")]
    Sampler(String),
    #[error("replicate {replicate} of scenario {scenario} failed: {source}")]
    Replicate {
        scenario: String,
        replicate: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("schema mismatch: missing column `{0}`")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
