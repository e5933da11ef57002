use std::path::PathBuf;

use thiserror::Error;

use crate::backend::BackendError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate doc_id {doc_id:?} on lines {first_line} and {second_line}")]
    DuplicateDocId {
        doc_id: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid JSON in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaVersion { expected: u32, found: u32 },

    #[error("invalid knowledge graph: {0}")]
    InvalidGraph(String),

    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),

    #[error("unknown passage id {0:?}")]
    UnknownPassage(String),

    #[error("unknown entity id {0}")]
    UnknownEntity(u32),

    #[error("corpus fingerprint mismatch: index built from {index}, graph built from {graph}")]
    FingerprintMismatch { index: String, graph: String },

    #[error("index was built from corpus {index} but the passage store holds {store}")]
    StoreMismatch { index: String, store: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("unknown class label {0:?}")]
    UnknownLabel(String),

    #[error("training diverged at epoch {epoch}: mean loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("backend failure while drafting {section}: {source}")]
    Backend {
        section: String,
        #[source]
        source: BackendError,
    },

    #[error("unparseable backend response for {section}: {message}")]
    UnparseableResponse { section: String, message: String },

    #[error("report is missing section {0}")]
    MissingSection(String),

    #[error("diagnosis_assessment carries no primary diagnosis claim")]
    MissingDiagnosis,

    #[error("report has {0} unverified factual claim(s); run grounding verification first")]
    UnverifiedClaims(usize),

    #[error("unknown report template {0:?}")]
    UnknownTemplate(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Errors caused by bad inputs, as opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. }
                | Error::Divergence { .. }
                | Error::Backend { .. }
                | Error::UnparseableResponse { .. }
                | Error::NonFinite(_)
        )
    }
}
