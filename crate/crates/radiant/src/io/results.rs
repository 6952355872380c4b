//! Experiment result tables (RFC 4180 CSV, one header row).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, Result};

/// One reconstruction run. Failed runs keep their coordinates, leave the
/// statistics empty and describe the failure in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub noise_sigma_deg: f64,
    pub patch_model: String,
    pub loss: String,
    pub mu: Option<f64>,
    pub seed: u64,
    pub mean_depth_err: Option<f64>,
    pub median: Option<f64>,
    pub std: Option<f64>,
    pub valid_frac: Option<f64>,
    /// Empty unless timing was requested, so that tables stay reproducible.
    pub runtime_ms: Option<f64>,
    pub error: String,
}

pub fn encode(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    if rows.is_empty() {
        writer.write_record([
            "experiment_id",
            "noise_sigma_deg",
            "patch_model",
            "loss",
            "mu",
            "seed",
            "mean_depth_err",
            "median",
            "std",
            "valid_frac",
            "runtime_ms",
            "error",
        ])?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    Ok(writer.into_inner().expect("in-memory writer cannot fail"))
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    fs::write(path, encode(rows)?).map_err(io_err(path))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}
