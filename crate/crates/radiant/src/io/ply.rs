//! ASCII PLY point clouds with `double` coordinates and an optional
//! per-vertex `quality` scalar.
//!
//! Values are written in Rust's shortest round-trip form, so reading a
//! written file recovers every coordinate exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use radiant_core::Vector3;

use super::{io_err, IoError, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub quality: Option<Vec<f64>>,
}

pub fn encode(points: &[Vector3<f64>], quality: Option<&[f64]>) -> Result<String> {
    if let Some(q) = quality {
        if q.len() != points.len() {
            return Err(IoError::SchemaError(format!("{} quality values for {} points", q.len(), points.len())));
        }
    }
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", points.len());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if quality.is_some() {
        out.push_str("property double quality\n");
    }
    out.push_str("end_header\n");
    for (i, p) in points.iter().enumerate() {
        if !p.iter().all(|v| v.is_finite()) {
            return Err(IoError::FiniteRequired(i));
        }
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(q) = quality {
            if !q[i].is_finite() {
                return Err(IoError::FiniteRequired(i));
            }
            let _ = write!(out, " {}", q[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_ply_points(path: &Path, points: &[Vector3<f64>], quality: Option<&[f64]>) -> Result<()> {
    let text = encode(points, quality)?;
    fs::write(path, text).map_err(io_err(path))
}

/// Reads files in the layout produced by [`encode`].
pub fn decode(text: &str) -> Result<PointCloud> {
    let bad = |msg: &str| IoError::SchemaError(format!("ply: {msg}"));
    let mut lines = text.lines();
    if lines.next() != Some("ply") || lines.next() != Some("format ascii 1.0") {
        return Err(bad("expected an ascii ply header"));
    }
    let mut count = None;
    let mut properties = Vec::new();
    for line in lines.by_ref() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["element", "vertex", n] => count = Some(n.parse::<usize>().map_err(|_| bad("vertex count"))?),
            ["property", "double", name] => properties.push(*name),
            ["comment", ..] => {}
            _ => return Err(bad(&format!("unsupported header line {line:?}"))),
        }
    }
    let count = count.ok_or_else(|| bad("missing vertex element"))?;
    let with_quality = match properties.as_slice() {
        ["x", "y", "z"] => false,
        ["x", "y", "z", "quality"] => true,
        _ => return Err(bad("unsupported property list")),
    };
    let mut cloud =
        PointCloud { points: Vec::with_capacity(count), quality: with_quality.then(|| Vec::with_capacity(count)) };
    for _ in 0..count {
        let line = lines.next().ok_or_else(|| bad("fewer vertices than declared"))?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("non-numeric vertex"))?;
        if values.len() != properties.len() {
            return Err(bad("vertex arity"));
        }
        cloud.points.push(Vector3::new(values[0], values[1], values[2]));
        if let Some(q) = cloud.quality.as_mut() {
            q.push(values[3]);
        }
    }
    Ok(cloud)
}

pub fn read_ply_points(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    decode(&text)
}
