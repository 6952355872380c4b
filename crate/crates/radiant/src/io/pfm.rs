//! Portable float maps.
//!
//! Layout: `PF` (3 channels) or `Pf` (1 channel), newline, `W H`, newline,
//! scale, newline, then `W·H·channels` 32-bit floats with rows stored bottom
//! to top. A negative scale means little-endian. Writers always emit `-1`.

use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use radiant_core::{Raster, Vector3};

use super::{io_err, IoError, Result};

/// Row-major image, top row first in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl PfmImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if !matches!(channels, 1 | 3) {
            return Err(IoError::MalformedHeader(format!("{channels} channels")));
        }
        if data.len() != width * height * channels {
            return Err(IoError::TruncatedData { expected: width * height * channels * 4, actual: data.len() * 4 });
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn from_scalar(raster: &Raster<f64>) -> Self {
        Self {
            width: raster.width(),
            height: raster.height(),
            channels: 1,
            data: raster.data().iter().map(|v| *v as f32).collect(),
        }
    }

    pub fn from_vectors(raster: &Raster<Vector3<f64>>) -> Self {
        Self {
            width: raster.width(),
            height: raster.height(),
            channels: 3,
            data: raster.data().iter().flat_map(|v| [v.x as f32, v.y as f32, v.z as f32]).collect(),
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn to_scalar(&self) -> Result<Raster<f64>> {
        if self.channels != 1 {
            return Err(IoError::SchemaError(format!("expected 1 channel, found {}", self.channels)));
        }
        Ok(Raster::from_fn(self.width, self.height, |x, y| self.pixel(x, y)[0] as f64))
    }

    pub fn to_vectors(&self) -> Result<Raster<Vector3<f64>>> {
        if self.channels != 3 {
            return Err(IoError::SchemaError(format!("expected 3 channels, found {}", self.channels)));
        }
        Ok(Raster::from_fn(self.width, self.height, |x, y| {
            let p = self.pixel(x, y);
            Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64)
        }))
    }
}

pub fn encode(image: &PfmImage, out: &mut impl Write) -> Result<()> {
    if let Some(i) = image.data.iter().position(|v| !v.is_finite()) {
        return Err(IoError::FiniteRequired(i));
    }
    let tag = if image.channels == 3 { "PF" } else { "Pf" };
    let mut bytes = format!("{tag}\n{} {}\n-1\n", image.width, image.height).into_bytes();
    let row = image.width * image.channels;
    bytes.reserve(image.data.len() * 4);
    for y in (0..image.height).rev() {
        for v in &image.data[y * row..(y + 1) * row] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&bytes).map_err(io_err(Path::new("<stream>")))
}

fn header_token(input: &mut impl BufRead) -> Result<String> {
    let mut line = String::new();
    let n = input.read_line(&mut line).map_err(|e| IoError::MalformedHeader(e.to_string()))?;
    if n == 0 {
        return Err(IoError::MalformedHeader("unexpected end of header".into()));
    }
    Ok(line.trim().to_owned())
}

pub fn decode(input: &mut impl BufRead) -> Result<PfmImage> {
    let channels = match header_token(input)?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(IoError::MalformedHeader(format!("magic {other:?}"))),
    };
    let dims = header_token(input)?;
    let parsed: Vec<usize> = dims
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| IoError::MalformedHeader(format!("dimensions {dims:?}")))?;
    let [width, height] = parsed[..] else {
        return Err(IoError::MalformedHeader(format!("dimensions {dims:?}")));
    };
    let scale_text = header_token(input)?;
    let scale: f32 = scale_text.parse().map_err(|_| IoError::MalformedHeader(format!("scale {scale_text:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(IoError::UnsupportedScale(scale));
    }
    let little = scale < 0.0;

    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels * 4))
        .ok_or_else(|| IoError::MalformedHeader(format!("dimensions {dims:?}")))?;
    let mut raw = Vec::with_capacity(expected);
    input.take(expected as u64).read_to_end(&mut raw).map_err(|e| IoError::MalformedHeader(e.to_string()))?;
    if raw.len() < expected {
        return Err(IoError::TruncatedData { expected, actual: raw.len() });
    }

    let row = width * channels;
    let mut data = vec![0.0f32; width * height * channels];
    for (k, chunk) in raw.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (file_row, col) = (k / row, k % row);
        data[(height - 1 - file_row) * row + col] = v;
    }
    Ok(PfmImage { width, height, channels, data })
}

pub fn write_pfm(path: &Path, image: &PfmImage) -> Result<()> {
    let mut bytes = Vec::new();
    encode(image, &mut bytes)?;
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_pfm(path: &Path) -> Result<PfmImage> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode(&mut bytes.as_slice())
}
