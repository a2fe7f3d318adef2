use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("touchstone parse error at line {line}: {msg}")]
    Touchstone { line: usize, msg: String },

    #[error("feature extraction error: {0}")]
    Features(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("dataset error at line {line}: {msg}")]
    Dataset { line: usize, msg: String },

    #[error("shape error in {layer}: {msg}")]
    Shape { layer: String, msg: String },

    #[error("non-finite value in {layer}")]
    Numeric { layer: String },

    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("model load error: {0}")]
    ModelLoad(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed input text rather than numerics.
    pub fn is_format_error(&self) -> bool {
        matches!(
            self,
            Error::Touchstone { .. } | Error::Dataset { .. } | Error::ModelLoad(_) | Error::Json(_) | Error::Config(_)
        )
    }
}
