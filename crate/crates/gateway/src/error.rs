use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend exhausted after {attempts} attempts: {last_error}")]
    BackendExhausted { attempts: u32, last_error: String },
    #[error("http status {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("no replay fixture for request digest {0}")]
    ReplayMiss(String),
    #[error("scripted backend queue is empty")]
    ScriptedQueueEmpty,
    #[error("no API key: set {0} or configure `api_key` for the backend")]
    AuthMissing(String),
    #[error("embedding input is empty")]
    EmptyInput,
    #[error("backend returned vectors of differing dimension ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("backend does not support {0}")]
    Unsupported(&'static str),
    #[error("malformed backend payload: {0}")]
    MalformedPayload(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
