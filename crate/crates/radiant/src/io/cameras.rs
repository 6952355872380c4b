//! Calibration JSON: a top-level array with one object per view,
//!
//! ```json
//! [{"fx": 360.0, "fy": 360.0, "cx": 127.5, "cy": 127.5, "width": 256, "height": 256,
//!   "rotation": [r00, r01, r02, r10, r11, r12, r20, r21, r22],
//!   "translation": [tx, ty, tz]}]
//! ```
//!
//! `rotation` (row-major) and `translation` map world points into the camera
//! frame, `x_cam = R x_world + t`.

use std::fs;
use std::path::Path;

use radiant_core::geometry::{CameraIntrinsics, CameraPose};
use radiant_core::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{io_err, IoError, Result};

/// Largest accepted deviation of a stored rotation from orthonormal.
pub const ROTATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl CameraRecord {
    pub fn new(intr: &CameraIntrinsics, pose: &CameraPose) -> Self {
        let r = pose.rotation();
        let t = pose.translation();
        Self {
            fx: intr.fx,
            fy: intr.fy,
            cx: intr.cx,
            cy: intr.cy,
            width: intr.width,
            height: intr.height,
            rotation: core::array::from_fn(|k| r[(k / 3, k % 3)]),
            translation: [t.x, t.y, t.z],
        }
    }

    /// Validated calibration. Rigid rotations are kept bit-for-bit; those
    /// within [`ROTATION_TOL`] are snapped to the nearest rotation.
    pub fn to_camera(&self, index: usize) -> Result<(CameraIntrinsics, CameraPose)> {
        let intr = CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
            .map_err(|e| IoError::SchemaError(format!("camera {index}: {e}")))?;
        let r = Matrix3::from_row_slice(&self.rotation);
        let t = Vector3::from(self.translation);
        if !t.iter().all(|v| v.is_finite()) {
            return Err(IoError::SchemaError(format!("camera {index}: non-finite translation")));
        }
        let pose =
            CameraPose::new(r, t).or_else(|_| CameraPose::orthonormalized(r, t, ROTATION_TOL)).map_err(
                |e| match e {
                    radiant_core::Error::NonRigidRotation(deviation) => IoError::NonRigidRotation { index, deviation },
                    other => IoError::SchemaError(format!("camera {index}: {other}")),
                },
            )?;
        Ok((intr, pose))
    }
}

pub fn parse_cameras(text: &str) -> Result<Vec<(CameraIntrinsics, CameraPose)>> {
    let records: Vec<CameraRecord> =
        serde_json::from_str(text).map_err(|e| IoError::SchemaError(format!("cameras: {e}")))?;
    records.iter().enumerate().map(|(i, r)| r.to_camera(i)).collect()
}

pub fn format_cameras(cameras: &[(CameraIntrinsics, CameraPose)]) -> String {
    let records: Vec<CameraRecord> = cameras.iter().map(|(i, p)| CameraRecord::new(i, p)).collect();
    let mut text = serde_json::to_string_pretty(&records).expect("camera records serialize");
    text.push('\n');
    text
}

pub fn read_cameras(path: &Path) -> Result<Vec<(CameraIntrinsics, CameraPose)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_cameras(&text)
}

pub fn write_cameras(path: &Path, cameras: &[(CameraIntrinsics, CameraPose)]) -> Result<()> {
    fs::write(path, format_cameras(cameras)).map_err(io_err(path))
}
