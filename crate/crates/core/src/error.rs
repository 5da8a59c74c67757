use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate fusion weights: {0}")]
    DegenerateWeights(String),
    #[error("no bias components present")]
    EmptyComponents,
    #[error("value {value} outside [{min}, {max}]")]
    Range { value: f64, min: f64, max: f64 },
    #[error("decode error: {0}")]
    Decode(String),
    #[error("unsupported format: {0}")]
    Format(String),
    #[error("corrupt data: {0}")]
    Corruption(String),
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("index is empty")]
    EmptyIndex,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("backend timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("backend transport error: {0}")]
    Transport(String),
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("OCR adapter error: {0}")]
    Adapter(String),
    #[error("image cannot be analyzed: neither OCR text nor caption is available")]
    UnanalyzableImage,
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that originate in a remote model backend.
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            Error::Timeout { .. } | Error::Status { .. } | Error::Transport(_) | Error::Protocol(_)
        )
    }
}
