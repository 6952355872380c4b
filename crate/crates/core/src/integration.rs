//! Perspective integration of a normal patch into relative depth scales.
//!
//! On the ray `x = z K⁻¹[u, v, 1]ᵀ`, a surface with camera-frame normal `n`
//! has log-depth gradient
//!
//! ```text
//! ∂log z/∂u = −n_x / (f_x n·d),   ∂log z/∂v = −n_y / (f_y n·d)
//! ```
//!
//! with `d = K⁻¹[u, v, 1]ᵀ`. The patch is integrated by least squares on
//! forward differences with the center pinned to `log z = 0`. Each edge
//! target is the mean of the log-depth increments predicted by the tangent
//! planes at its two endpoints, `log(n·d_a) − log(n·d_b)`: the line integral of
//! the gradient above for a constant normal, so planes integrate exactly.
//! The resulting `α_j = z_j / z_center` turn any center depth into a full
//! surface patch.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::geometry::{CameraIntrinsics, Pixel};
use crate::{Error, Result};

/// Smallest accepted `|n · d|`.
pub const GRAZING_EPS: f64 = 1e-3;

/// Square window of reference pixels around a center, possibly with holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    center: (usize, usize),
    radius: usize,
    pixels: Vec<(usize, usize)>,
    normals: Vec<Vector3<f64>>,
    center_index: usize,
}

impl Patch {
    /// `normals` are camera-frame unit vectors, one per entry of `pixels`.
    pub fn new(
        center: (usize, usize),
        radius: usize,
        pixels: Vec<(usize, usize)>,
        normals: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        if pixels.len() != normals.len() {
            return Err(Error::InvalidPatch("one normal per pixel is required"));
        }
        let center_index =
            pixels.iter().position(|p| *p == center).ok_or(Error::InvalidPatch("center is not a member"))?;
        let r = radius as i64;
        if pixels.iter().any(|&(x, y)| (x as i64 - center.0 as i64).abs() > r || (y as i64 - center.1 as i64).abs() > r)
        {
            return Err(Error::InvalidPatch("member outside the patch window"));
        }
        Ok(Self { center, radius, pixels, normals, center_index })
    }

    /// Collects the window around `center` in row-major order, keeping the
    /// texels for which `normal_at` yields a normal.
    pub fn gather(
        center: (usize, usize),
        radius: usize,
        width: usize,
        height: usize,
        mut normal_at: impl FnMut(usize, usize) -> Option<Vector3<f64>>,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity((2 * radius + 1).pow(2));
        let mut normals = Vec::with_capacity(pixels.capacity());
        let x_lo = center.0.saturating_sub(radius);
        let y_lo = center.1.saturating_sub(radius);
        let x_hi = (center.0 + radius).min(width.saturating_sub(1));
        let y_hi = (center.1 + radius).min(height.saturating_sub(1));
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                if let Some(n) = normal_at(x, y) {
                    pixels.push((x, y));
                    normals.push(n);
                }
            }
        }
        Self::new(center, radius, pixels, normals)
    }

    pub fn center(&self) -> (usize, usize) {
        self.center
    }

    pub fn center_index(&self) -> usize {
        self.center_index
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn pixel(&self, j: usize) -> Pixel {
        let (x, y) = self.pixels[j];
        Pixel::new(x as f64, y as f64)
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn center_normal(&self) -> &Vector3<f64> {
        &self.normals[self.center_index]
    }

    /// Slot of `(x, y)` in the `(2r+1)²` window, if it falls inside.
    fn window_slot(&self, x: usize, y: usize) -> Option<usize> {
        let side = 2 * self.radius + 1;
        let dx = x as i64 - self.center.0 as i64 + self.radius as i64;
        let dy = y as i64 - self.center.1 as i64 + self.radius as i64;
        if dx < 0 || dy < 0 || dx as usize >= side || dy as usize >= side {
            return None;
        }
        Some(dy as usize * side + dx as usize)
    }
}

/// Depth of each patch pixel relative to the center, ordered as the patch.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleField {
    alphas: Vec<f64>,
}

impl ScaleField {
    /// All ones: the fronto-parallel patch.
    pub fn unit(len: usize) -> Self {
        Self { alphas: vec![1.0; len] }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub scales: ScaleField,
    /// Euclidean norm of the least-squares residual over all edges.
    pub residual: f64,
}

/// `(∂log z/∂u, ∂log z/∂v)` of the surface through pixel `p` with
/// camera-frame normal `n`.
pub fn log_depth_gradient(intr: &CameraIntrinsics, p: Pixel, n: &Vector3<f64>) -> Result<[f64; 2]> {
    let d = intr.ray(p);
    let nd = n.dot(&d);
    if !(nd.abs() >= GRAZING_EPS) {
        return Err(Error::GrazingNormal(nd.abs()));
    }
    Ok([-n.x / (intr.fx * nd), -n.y / (intr.fy * nd)])
}

/// Integrates the patch normals into scale factors `α_j` with `α = 1` at the
/// center.
pub fn integrate_patch(intr: &CameraIntrinsics, patch: &Patch) -> Result<Integration> {
    if patch.pixels.iter().any(|&(x, y)| x >= intr.width || y >= intr.height) {
        return Err(Error::InvalidPatch("member outside the raster"));
    }
    let m = patch.len();
    let rays: Vec<Vector3<f64>> = (0..m).map(|j| intr.ray(patch.pixel(j))).collect();
    for (n, d) in patch.normals.iter().zip(&rays) {
        let nd = n.dot(d);
        if !(nd.abs() >= GRAZING_EPS) {
            return Err(Error::GrazingNormal(nd.abs()));
        }
    }
    let increment = |a: usize, b: usize| -> Result<f64> {
        let mut sum = 0.0;
        for n in [&patch.normals[a], &patch.normals[b]] {
            let ratio = n.dot(&rays[a]) / n.dot(&rays[b]);
            if !(ratio > 0.0) {
                return Err(Error::GrazingNormal(n.dot(&rays[b]).abs()));
            }
            sum += ratio.ln();
        }
        Ok(0.5 * sum)
    };

    let side = 2 * patch.radius + 1;
    let mut slots = vec![usize::MAX; side * side];
    for (j, &(x, y)) in patch.pixels.iter().enumerate() {
        let slot = patch.window_slot(x, y).ok_or(Error::InvalidPatch("member outside the window"))?;
        slots[slot] = j;
    }

    // (from, to, target difference of log depth)
    let mut edges = Vec::with_capacity(2 * m);
    for (a, &(x, y)) in patch.pixels.iter().enumerate() {
        let right = patch.window_slot(x + 1, y).map(|s| slots[s]).filter(|&b| b != usize::MAX);
        let down = patch.window_slot(x, y + 1).map(|s| slots[s]).filter(|&b| b != usize::MAX);
        for b in [right, down].into_iter().flatten() {
            edges.push((a, b, increment(a, b)?));
        }
    }

    if !connected_to_center(m, patch.center_index, &edges) {
        return Err(Error::SingularSystem);
    }

    // Unknowns are every member but the center, whose log depth is 0.
    let c = patch.center_index;
    let unknown = |j: usize| {
        if j < c {
            Some(j)
        } else if j > c {
            Some(j - 1)
        } else {
            None
        }
    };
    let n = m - 1;
    let mut normal = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for &(a, b, t) in &edges {
        let (ia, ib) = (unknown(a), unknown(b));
        if let Some(i) = ia {
            normal[(i, i)] += 1.0;
            rhs[i] -= t;
        }
        if let Some(i) = ib {
            normal[(i, i)] += 1.0;
            rhs[i] += t;
        }
        if let (Some(i), Some(k)) = (ia, ib) {
            normal[(i, k)] -= 1.0;
            normal[(k, i)] -= 1.0;
        }
    }

    let mut log_depth = vec![0.0; m];
    if n > 0 {
        let solution = normal.cholesky().ok_or(Error::SingularSystem)?.solve(&rhs);
        for (j, value) in log_depth.iter_mut().enumerate() {
            if let Some(i) = unknown(j) {
                *value = solution[i];
            }
        }
    }
    let residual = edges
        .iter()
        .map(|&(a, b, t)| {
            let r = log_depth[b] - log_depth[a] - t;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    let alphas = log_depth.iter().map(|l| l.exp()).collect();
    Ok(Integration { scales: ScaleField { alphas }, residual })
}

fn connected_to_center(m: usize, center: usize, edges: &[(usize, usize, f64)]) -> bool {
    let mut adjacency = vec![Vec::new(); m];
    for &(a, b, _) in edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let mut seen = vec![false; m];
    seen[center] = true;
    let mut queue = VecDeque::from([center]);
    let mut reached = 1;
    while let Some(j) = queue.pop_front() {
        for &k in &adjacency[j] {
            if !seen[k] {
                seen[k] = true;
                reached += 1;
                queue.push_back(k);
            }
        }
    }
    reached == m
}
