use std::path::PathBuf;

use thiserror::Error;

use crate::store::{BlockCoord, EdgeKey, VertexId};

/// Errors raised by the reconstruction engine and its file formats.
#[derive(Error, Debug)]
pub enum Error {
    #[error("capacity exhausted: {what} (limit {limit})")]
    Capacity { what: &'static str, limit: usize },

    #[error("vertex {0:?} freed twice")]
    DoubleFree(VertexId),

    #[error("block {0:?} is not allocated")]
    BlockNotFound(BlockCoord),

    #[error("edge {edge:?} required by the triangle layout holds no vertex")]
    MissingEdgeVertex { edge: EdgeKey },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: format error at byte {offset}: {msg}")]
    Format {
        path: PathBuf,
        offset: usize,
        msg: String,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity { .. } => 3,
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
