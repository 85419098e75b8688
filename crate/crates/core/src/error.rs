use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("value {0} is outside the supported range [1, 1e16]")]
    OutOfRange(f64),
    #[error("rendering needs {needed} tokens but the scheme pads to {pad_len}")]
    Overflow { needed: usize, pad_len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty input")]
    EmptyInput,
    #[error("index {index} out of range for {len} bins")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("length mismatch: {left} predictions vs {right} truths")]
    LengthMismatch { left: usize, right: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite loss at epoch {epoch}, step {step}: {detail}")]
    NonFiniteLoss { epoch: usize, step: usize, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Stable snake_case name of the variant, used in CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::OutOfRange(_) => "out_of_range",
            Error::Overflow { .. } => "overflow",
            Error::InvalidParam(_) => "invalid_param",
            Error::InvalidInput(_) => "invalid_input",
            Error::EmptyInput => "empty_input",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Usage(_) => "usage",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
