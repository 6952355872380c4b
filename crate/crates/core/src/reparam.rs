//! Radiance re-parametrization of (reflectance, normal) pairs.
//!
//! A Lambertian surface with albedo `r` (1 or 3 channels) and unit normal `n`
//! lit by three directional lights stored row-wise in `L` has simulated
//! radiance `L n rᵀ`, a 3×q matrix. For non-singular `L` and non-zero `r`
//! the map is a bijection, inverted in closed form for q = 1 and through a
//! rank-one SVD factorisation for q = 3.

use core::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::{Error, Result};

/// Tolerance on `‖n‖ − 1` accepted by [`render_pbr`].
pub const UNIT_NORMAL_TOL: f64 = 1e-6;
/// Below this magnitude a radiance is treated as coming from a black surface.
pub const DEGENERACY_EPS: f64 = 1e-9;
/// `|det L|` must exceed this fraction of `intensity³`.
pub const SINGULARITY_EPS: f64 = 1e-9;

/// cos of the slant of each optimal light relative to the normal, 1/√3
/// (a slant of 54.74°).
pub const OPTIMAL_COS_SLANT: f64 = 0.577_350_269_189_625_8;

/// Albedo with one (grey) or three (RGB) channels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReflectanceVec {
    values: [f64; 3],
    channels: u8,
}

impl ReflectanceVec {
    pub fn gray(value: f64) -> Self {
        Self { values: [value, 0.0, 0.0], channels: 1 }
    }

    pub fn rgb(values: [f64; 3]) -> Self {
        Self { values, channels: 3 }
    }

    /// White reflectance, used when only normals are available.
    pub fn white(channels: usize) -> Self {
        if channels == 3 {
            Self::rgb([1.0; 3])
        } else {
            Self::gray(1.0)
        }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        match *values {
            [g] => Ok(Self::gray(g)),
            [r, g, b] => Ok(Self::rgb([r, g, b])),
            _ => Err(Error::UnsupportedChannels(values.len())),
        }
    }

    pub fn zeros(channels: usize) -> Self {
        Self { values: [0.0; 3], channels: channels as u8 }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels as usize
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.channels as usize]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values[..self.channels as usize]
    }

    pub fn norm(&self) -> f64 {
        self.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_value(&self) -> f64 {
        self.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks that every channel is finite and within `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidReflectance("channels must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn distance_sq(&self, other: &Self) -> f64 {
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Three directional lights stored row-wise (intensity × direction).
///
/// Construction does not reject singular matrices; the inversions do.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightTriplet {
    matrix: Matrix3<f64>,
    intensity: f64,
}

impl LightTriplet {
    /// Wraps an arbitrary light matrix. The intensity is taken as the largest
    /// row norm.
    pub fn from_rows(matrix: Matrix3<f64>) -> Self {
        let intensity = (0..3).map(|i| matrix.row(i).norm()).fold(0.0, f64::max);
        Self { matrix, intensity }
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    #[inline]
    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn is_singular(&self) -> bool {
        !(self.intensity > 0.0) || self.matrix.determinant().abs() <= SINGULARITY_EPS * self.intensity.powi(3)
    }

    fn inverse(&self) -> Result<Matrix3<f64>> {
        if self.is_singular() {
            return Err(Error::SingularLighting);
        }
        self.matrix.try_inverse().ok_or(Error::SingularLighting)
    }

    /// Radiance of a unit-albedo surface, `L n`.
    #[inline]
    pub fn shade(&self, n: &Vector3<f64>) -> Vector3<f64> {
        self.matrix * n
    }
}

/// Simulated radiance `L n rᵀ`, one 3-vector column per reflectance channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadianceVec {
    columns: [Vector3<f64>; 3],
    channels: u8,
}

impl RadianceVec {
    pub fn from_columns(columns: &[Vector3<f64>]) -> Result<Self> {
        let mut out = Self { columns: [Vector3::zeros(); 3], channels: columns.len() as u8 };
        match columns.len() {
            1 | 3 => {
                out.columns[..columns.len()].copy_from_slice(columns);
                Ok(out)
            }
            n => Err(Error::UnsupportedChannels(n)),
        }
    }

    /// `shaded · rᵀ` where `shaded = L n`.
    #[inline]
    pub fn from_shading(shaded: &Vector3<f64>, r: &ReflectanceVec) -> Self {
        let mut columns = [Vector3::zeros(); 3];
        for (c, &rc) in columns.iter_mut().zip(r.as_slice()) {
            *c = shaded * rc;
        }
        Self { columns, channels: r.channels }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels as usize
    }

    #[inline]
    pub fn columns(&self) -> &[Vector3<f64>] {
        &self.columns[..self.channels as usize]
    }

    /// Squared Frobenius distance. Channel counts must agree.
    #[inline]
    pub fn distance_sq(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.channels, other.channels);
        self.columns().iter().zip(other.columns()).map(|(a, b)| (a - b).norm_squared()).sum()
    }

    /// The radiance as a 3×3 matrix, zero-padded for grey data.
    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.columns)
    }
}

fn check_unit(n: &Vector3<f64>) -> Result<()> {
    let norm = n.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORMAL_TOL {
        return Err(Error::NonUnitNormal(norm));
    }
    Ok(())
}

/// Lambertian rendering under three directional lights, `F(r, n, L) = L n rᵀ`.
pub fn render_pbr(r: &ReflectanceVec, n: &Vector3<f64>, lights: &LightTriplet) -> Result<RadianceVec> {
    check_unit(n)?;
    Ok(RadianceVec::from_shading(&lights.shade(n), r))
}

/// Deterministic tangent frame `(t1, t2)` around `n`.
///
/// `t1` is `e_x` projected onto the tangent plane, or `e_y` when `n` is too
/// close to `e_x`; `t2 = n × t1`.
pub fn tangent_frame(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let axis = if n.x.abs() > 0.9 { Vector3::y() } else { Vector3::x() };
    let t1 = (axis - n * n.dot(&axis)).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

/// Three equal-intensity lights at slant arccos(1/√3) from `n`, 120° apart
/// in azimuth. The resulting matrix is orthogonal up to `intensity`, so its
/// condition number is 1, and every light sees the surface at the same
/// positive incidence.
pub fn optimal_triplet(n: &Vector3<f64>, intensity: f64) -> LightTriplet {
    optimal_triplet_with_phase(n, intensity, 0.0)
}

/// [`optimal_triplet`] with the azimuths rotated by `phase` radians.
pub fn optimal_triplet_with_phase(n: &Vector3<f64>, intensity: f64, phase: f64) -> LightTriplet {
    let (t1, t2) = tangent_frame(n);
    let sin_slant = (2.0f64 / 3.0).sqrt();
    let mut matrix = Matrix3::zeros();
    for k in 0..3 {
        let azimuth = phase + 2.0 * PI * k as f64 / 3.0;
        let dir = (t1 * azimuth.cos() + t2 * azimuth.sin()) * sin_slant + n * OPTIMAL_COS_SLANT;
        matrix.set_row(k, &(dir * intensity).transpose());
    }
    LightTriplet { matrix, intensity }
}

/// Lights along the canonical basis. With unit white albedo the radiance is
/// the normal itself.
pub fn canonical_triplet() -> LightTriplet {
    LightTriplet { matrix: Matrix3::identity(), intensity: 1.0 }
}

/// Inverts a single-channel radiance: `r = ‖L⁻¹v‖`, `n = L⁻¹v / r`.
pub fn invert_reparam_q1(v: &RadianceVec, lights: &LightTriplet) -> Result<(ReflectanceVec, Vector3<f64>)> {
    if v.channels() != 1 {
        return Err(Error::UnsupportedChannels(v.channels()));
    }
    let w = lights.inverse()? * v.columns[0];
    let r = w.norm();
    if !(r > DEGENERACY_EPS) {
        return Err(Error::DegenerateRadiance);
    }
    Ok((ReflectanceVec::gray(r), w / r))
}

/// Inverts a three-channel radiance by factoring `L⁻¹V ≈ n rᵀ` with its
/// dominant singular triple.
///
/// The sign is fixed so that the albedo sums to a nonnegative value. When the
/// albedo cannot decide (its sum vanishes), the normal is made to face the
/// camera along `view_dir` if one is given.
pub fn invert_reparam_q3(
    v: &RadianceVec,
    lights: &LightTriplet,
    view_dir: Option<&Vector3<f64>>,
) -> Result<(ReflectanceVec, Vector3<f64>)> {
    if v.channels() != 3 {
        return Err(Error::UnsupportedChannels(v.channels()));
    }
    let m = lights.inverse()? * v.to_matrix();
    let (sigma, u, w) = dominant_singular_triple(&m);
    if !(sigma > DEGENERACY_EPS) {
        return Err(Error::DegenerateRadiance);
    }
    let mut n = u;
    let mut r = w * sigma;
    let sum = r.sum();
    let flip = if sum.abs() > DEGENERACY_EPS * sigma { sum < 0.0 } else { view_dir.is_some_and(|d| n.dot(d) > 0.0) };
    if flip {
        n = -n;
        r = -r;
    }
    Ok((ReflectanceVec::rgb([r.x, r.y, r.z]), n))
}

/// Inverts either channel count. `view_dir` only matters for three channels.
pub fn invert_reparam(
    v: &RadianceVec,
    lights: &LightTriplet,
    view_dir: Option<&Vector3<f64>>,
) -> Result<(ReflectanceVec, Vector3<f64>)> {
    match v.channels() {
        1 => invert_reparam_q1(v, lights),
        3 => invert_reparam_q3(v, lights, view_dir),
        n => Err(Error::UnsupportedChannels(n)),
    }
}

/// Largest singular value with its left and right singular vectors.
fn dominant_singular_triple(m: &Matrix3<f64>) -> (f64, Vector3<f64>, Vector3<f64>) {
    let svd = m.svd(true, true);
    let (idx, sigma) = svd.singular_values.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, s)| {
        if s > best.1 {
            (i, s)
        } else {
            best
        }
    });
    // Both factors were requested above.
    let u = svd.u.expect("left singular vectors").column(idx).into_owned();
    let w = svd.v_t.expect("right singular vectors").row(idx).transpose();
    (sigma, u, w)
}

/// Singular values of a light matrix, largest first.
pub fn singular_values(m: &Matrix3<f64>) -> [f64; 3] {
    let s = m.singular_values();
    let mut out = [s[0], s[1], s[2]];
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Norm order used by [`embed_reflectance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NormOrder {
    L1,
    L2,
}

impl NormOrder {
    pub fn exponent(self) -> f64 {
        match self {
            NormOrder::L1 => 1.0,
            NormOrder::L2 => 2.0,
        }
    }

    pub fn norm(self, values: &[f64]) -> f64 {
        match self {
            NormOrder::L1 => values.iter().map(|v| v.abs()).sum(),
            NormOrder::L2 => values.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

/// Reflectance augmented with one auxiliary channel so that its p-norm is
/// the same for every input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddedReflectance {
    values: [f64; 4],
    len: u8,
    order: NormOrder,
}

impl EmbeddedReflectance {
    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.len as usize]
    }

    pub fn order(&self) -> NormOrder {
        self.order
    }

    pub fn norm(&self) -> f64 {
        self.order.norm(self.as_slice())
    }

    /// The norm every embedding of a `q`-channel reflectance has:
    /// `q^(1/p − 1)`.
    pub fn expected_norm(channels: usize, order: NormOrder) -> f64 {
        (channels as f64).powf(1.0 / order.exponent() - 1.0)
    }
}

/// `(1/q) · [rᵀ, (q − ‖r‖ₚᵖ)^(1/p)]ᵀ`.
pub fn embed_reflectance(r: &ReflectanceVec, order: NormOrder) -> Result<EmbeddedReflectance> {
    let q = r.channels() as f64;
    let powered: f64 = match order {
        NormOrder::L1 => r.as_slice().iter().map(|v| v.abs()).sum(),
        NormOrder::L2 => r.as_slice().iter().map(|v| v * v).sum(),
    };
    if !powered.is_finite() || powered > q {
        return Err(Error::NormOverflow);
    }
    let aux = match order {
        NormOrder::L1 => q - powered,
        NormOrder::L2 => (q - powered).sqrt(),
    };
    let mut values = [0.0; 4];
    for (dst, src) in values.iter_mut().zip(r.as_slice()) {
        *dst = src / q;
    }
    values[r.channels()] = aux / q;
    Ok(EmbeddedReflectance { values, len: r.channels() as u8 + 1, order })
}
