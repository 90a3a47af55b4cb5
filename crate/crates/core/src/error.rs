use std::path::PathBuf;

use crate::model::{FlowId, FrameId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid route: {0}")]
    InvalidRoute(String),

    #[error("flow {flow}: field `{field}`: {msg}")]
    InvalidFlow {
        flow: FlowId,
        field: &'static str,
        msg: String,
    },

    #[error("aggregate {frame}: {msg}")]
    InvalidAggregate { frame: FrameId, msg: String },

    #[error("invalid workload parameters: {}", .0.join("; "))]
    InvalidWorkload(Vec<String>),

    #[error("aggregate {0} has no non-critical member to extract")]
    NothingToExtract(FrameId),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}, column {column}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        msg: String,
    },

    #[error("{path}: record {index}: {source}")]
    Record {
        path: PathBuf,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("scenario manifests differ:\n{0}")]
    ManifestMismatch(String),

    #[error("{run}: schedule failed verification with {} violation(s)", .violations.len())]
    Verification {
        run: String,
        violations: Vec<crate::schedule::ConstraintViolation>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
