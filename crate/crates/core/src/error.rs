use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed JSON: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate idx {0:?}")]
    DuplicateIdx(String),

    #[error("thread {idx:?}: unknown category {category:?}")]
    UnknownCategory { idx: String, category: String },

    #[error("{0}")]
    Validation(String),

    #[error("invalid rule file {path}:{line}: {message}")]
    Rules {
        path: String,
        line: usize,
        message: String,
    },

    #[error("vocabulary error: {0}")]
    Vocab(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("label space mismatch: model was trained on {expected}, got {found}")]
    LabelSpaceMismatch { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &std::path::Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV built from UTF-8 strings"))
}
