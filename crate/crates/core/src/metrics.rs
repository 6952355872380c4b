//! Evaluation metrics. Every reduction runs in a fixed order so results do
//! not depend on how the inputs were produced.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::raster::Raster;
use crate::reparam::{singular_values, LightTriplet};
use crate::sweep::DepthResult;
use crate::{Error, Result};

/// Condition numbers above this are reported as singular.
const SINGULAR_RATIO: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorSummary {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
    /// Samples left out because the estimate was invalid.
    pub excluded: usize,
}

/// Mean, median and standard deviation of `values`.
pub fn summarize(values: &[f64]) -> Result<ErrorSummary> {
    if values.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) { 0.5 * (sorted[mid - 1] + sorted[mid]) } else { sorted[mid] };
    Ok(ErrorSummary { mean, median, std: var.sqrt(), count: values.len(), excluded: 0 })
}

/// `|z_est − z_gt|` over pixels in `mask` where the estimate is valid.
/// Masked-in pixels with an invalid estimate are counted in `excluded`.
pub fn mean_depth_error(est: &DepthResult, gt: &Raster<f64>, mask: &Raster<bool>) -> Result<ErrorSummary> {
    let (w, h) = gt.shape();
    est.depth.ensure_shape(w, h)?;
    mask.ensure_shape(w, h)?;
    let mut errors = Vec::new();
    let mut excluded = 0;
    for i in 0..w * h {
        if !mask.data()[i] {
            continue;
        }
        let z = est.depth.data()[i];
        if est.valid.data()[i] && z.is_finite() {
            errors.push((z - gt.data()[i]).abs());
        } else {
            excluded += 1;
        }
    }
    let mut summary = summarize(&errors)?;
    summary.excluded = excluded;
    Ok(summary)
}

/// Mean angular error in degrees over `mask`.
pub fn normal_mae(est: &Raster<Vector3<f64>>, gt: &Raster<Vector3<f64>>, mask: &Raster<bool>) -> Result<ErrorSummary> {
    let (w, h) = gt.shape();
    est.ensure_shape(w, h)?;
    mask.ensure_shape(w, h)?;
    let errors: Vec<f64> =
        (0..w * h).filter(|&i| mask.data()[i]).map(|i| angle_deg(&est.data()[i], &gt.data()[i])).collect();
    summarize(&errors)
}

/// Angle between unit vectors, in degrees.
#[inline]
pub fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Symmetric Chamfer distance: the average of the mean nearest-neighbour
/// distance from `a` to `b` and from `b` to `a`.
///
/// `median`, `std` and `count` describe the pooled nearest-neighbour
/// distances of both directions.
pub fn chamfer_distance(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<ErrorSummary> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let a_to_b = PointGrid::new(b).nearest_distances(a);
    let b_to_a = PointGrid::new(a).nearest_distances(b);
    let mean_ab = a_to_b.iter().sum::<f64>() / a.len() as f64;
    let mean_ba = b_to_a.iter().sum::<f64>() / b.len() as f64;
    let mut pooled = a_to_b;
    pooled.extend(b_to_a);
    let mut summary = summarize(&pooled)?;
    summary.mean = 0.5 * (mean_ab + mean_ba);
    Ok(summary)
}

/// Uniform bucket grid over a point set for exact nearest-neighbour queries.
pub struct PointGrid<'a> {
    points: &'a [Vector3<f64>],
    origin: Vector3<f64>,
    cell: f64,
    dims: [usize; 3],
    /// CSR layout: `order[starts[c]..starts[c + 1]]` are the points of cell `c`.
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> PointGrid<'a> {
    const MAX_DIM: usize = 128;

    pub fn new(points: &'a [Vector3<f64>]) -> Self {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = hi - lo;
        let longest = extent.max().max(1e-12);
        // About two points per cell for a volume-filling cloud.
        let volume = extent.iter().map(|e| e.max(longest * 1e-3)).product::<f64>();
        let mut cell = (2.0 * volume / points.len() as f64).cbrt().max(longest / Self::MAX_DIM as f64);
        if !(cell > 0.0) || !cell.is_finite() {
            cell = 1.0;
        }
        let dims = core::array::from_fn(|k| ((extent[k] / cell).floor() as usize + 1).min(Self::MAX_DIM));
        let mut grid = Self { points, origin: lo, cell, dims, starts: Vec::new(), order: Vec::new() };
        let cells: Vec<usize> = points.iter().map(|p| grid.flat(grid.cell_of(p))).collect();
        let total = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0usize; total + 1];
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for c in 0..total {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut order = vec![0; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            order[next[c]] = i;
            next[c] += 1;
        }
        grid.starts = counts;
        grid.order = order;
        grid
    }

    fn cell_of(&self, p: &Vector3<f64>) -> [usize; 3] {
        core::array::from_fn(|k| {
            let f = ((p[k] - self.origin[k]) / self.cell).floor();
            if f < 0.0 {
                0
            } else {
                (f as usize).min(self.dims[k] - 1)
            }
        })
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    /// Distance from `q` to its nearest point.
    pub fn nearest(&self, q: &Vector3<f64>) -> f64 {
        let c = self.cell_of(q);
        let mut best = f64::INFINITY;
        let max_ring = *self.dims.iter().max().unwrap_or(&1);
        for ring in 0..=max_ring {
            let lo: [i64; 3] = core::array::from_fn(|k| c[k] as i64 - ring as i64);
            let hi: [i64; 3] = core::array::from_fn(|k| c[k] as i64 + ring as i64);
            for z in lo[2].max(0)..=hi[2].min(self.dims[2] as i64 - 1) {
                for y in lo[1].max(0)..=hi[1].min(self.dims[1] as i64 - 1) {
                    let on_shell_zy = z == lo[2] || z == hi[2] || y == lo[1] || y == hi[1];
                    for x in lo[0].max(0)..=hi[0].min(self.dims[0] as i64 - 1) {
                        if !on_shell_zy && x != lo[0] && x != hi[0] {
                            continue;
                        }
                        let cell = self.flat([x as usize, y as usize, z as usize]);
                        for &i in &self.order[self.starts[cell]..self.starts[cell + 1]] {
                            let d = distance(q, &self.points[i]);
                            if d < best {
                                best = d;
                            }
                        }
                    }
                }
            }
            // Anything outside the searched block is at least this far away.
            let clearance = (0..3)
                .map(|k| {
                    let block_lo = self.origin[k] + lo[k] as f64 * self.cell;
                    let block_hi = self.origin[k] + (hi[k] + 1) as f64 * self.cell;
                    let below = if lo[k] <= 0 { f64::INFINITY } else { q[k] - block_lo };
                    let above = if hi[k] >= self.dims[k] as i64 - 1 { f64::INFINITY } else { block_hi - q[k] };
                    below.min(above)
                })
                .fold(f64::INFINITY, f64::min);
            if best <= clearance {
                break;
            }
        }
        best
    }

    pub fn nearest_distances(&self, queries: &[Vector3<f64>]) -> Vec<f64> {
        queries.iter().map(|q| self.nearest(q)).collect()
    }
}

#[inline]
fn distance(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let d = a - b;
    (d.x * d.x + d.y * d.y + d.z * d.z).sqrt()
}

/// Ratio of the extreme singular values of the light matrix;
/// `f64::INFINITY` when the matrix is singular.
pub fn condition_number(lights: &LightTriplet) -> f64 {
    let s = singular_values(lights.matrix());
    if !(s[2] > 0.0) || s[0] / s[2] > SINGULAR_RATIO {
        return f64::INFINITY;
    }
    s[0] / s[2]
}
