use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("literal vector is not complement-structured at index {0}")]
    NotComplemented(usize),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("tile mode mismatch: expected {expected}, tile is {actual}")]
    Mode {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("bad magic number {found:#010x} in {path}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("truncated file {path}: {detail}")]
    Truncated { path: PathBuf, detail: String },
    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at sample {index} is outside [0, {classes})")]
    LabelRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("partition mismatch: {0}")]
    Partition(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }

    /// True for errors caused by the input data rather than usage or configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::BadMagic { .. }
                | Error::Truncated { .. }
                | Error::CountMismatch { .. }
                | Error::LabelRange { .. }
                | Error::Csv(_)
                | Error::NotComplemented(_)
        )
    }
}
