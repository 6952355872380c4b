//! On-disk formats: PFM rasters, PLY point clouds, camera JSON, benchmark
//! directories and result tables.

pub mod benchmark;
pub mod cameras;
pub mod pfm;
pub mod ply;
pub mod results;

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed PFM header: {0}")]
    MalformedHeader(String),
    #[error("truncated data: expected {expected} bytes, found {actual}")]
    TruncatedData { expected: usize, actual: usize },
    #[error("unsupported PFM scale {0}")]
    UnsupportedScale(f32),
    #[error("non-finite value at index {0}")]
    FiniteRequired(usize),
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("rotation {index} deviates from orthonormal by {deviation:e}")]
    NonRigidRotation { index: usize, deviation: f64 },
    #[error("unsupported benchmark version {0:?}")]
    UnsupportedVersion(String),
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: radiant_core::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}
