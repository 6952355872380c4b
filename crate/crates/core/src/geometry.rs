//! Pinhole cameras, rigid transforms and raster sampling.
//!
//! Poses map world to camera coordinates, `x_cam = R x_world + t`. Pixel
//! `(0, 0)` is the center of the top-left texel; `u` grows to the right and
//! `v` downwards.

use nalgebra::{Matrix3, Vector3};

use crate::raster::Raster;
use crate::reparam::{ReflectanceVec, UNIT_NORMAL_TOL};
use crate::{Error, Result};

/// Camera-frame depth below which a point counts as behind the camera.
pub const MIN_DEPTH: f64 = 1e-12;
const ROTATION_TOL: f64 = 1e-9;
/// Blends of opposing normals shorter than this are rejected.
pub const MIN_BLENDED_NORM: f64 = 0.1;

/// Continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Zero-skew pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::InvalidIntrinsics("focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidIntrinsics("raster must be non-empty"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidIntrinsics("principal point outside the raster"));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// `K⁻¹ [u, v, 1]ᵀ`: the pixel ray scaled to unit camera depth.
    #[inline]
    pub fn ray(&self, p: Pixel) -> Vector3<f64> {
        Vector3::new((p.u - self.cx) / self.fx, (p.v - self.cy) / self.fy, 1.0)
    }

    /// Projects a camera-frame point without a depth check.
    #[inline]
    pub fn project_camera(&self, x: &Vector3<f64>) -> Pixel {
        Pixel::new(self.fx * x.x / x.z + self.cx, self.fy * x.y / x.z + self.cy)
    }

    pub fn in_bounds(&self, p: Pixel) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u <= (self.width - 1) as f64 && p.v <= (self.height - 1) as f64
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
    let gram = r.transpose() * r - Matrix3::identity();
    let ortho = gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ortho.max((r.determinant() - 1.0).abs())
}

impl CameraPose {
    /// Rotation must be orthonormal with determinant +1 to 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let dev = rotation_deviation(&rotation);
        if !(dev <= ROTATION_TOL) || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::NonRigidRotation(dev));
        }
        Ok(Self { rotation, translation })
    }

    /// Accepts a rotation within `tol` of orthonormal and snaps it to the
    /// nearest rotation.
    pub fn orthonormalized(rotation: Matrix3<f64>, translation: Vector3<f64>, tol: f64) -> Result<Self> {
        let dev = rotation_deviation(&rotation);
        if !(dev <= tol) {
            return Err(Error::NonRigidRotation(dev));
        }
        let svd = rotation.svd(true, true);
        let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        let mut snapped = u * v_t;
        if snapped.determinant() < 0.0 {
            return Err(Error::NonRigidRotation(dev));
        }
        // One Newton step of the polar iteration polishes the last ulps.
        snapped = (snapped + snapped.transpose().try_inverse().unwrap_or(snapped)) * 0.5;
        Self::new(snapped, translation)
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Camera at `center` looking at `target`; image `v` points along the
    /// component of `-up` orthogonal to the viewing direction.
    pub fn look_at(center: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> Result<Self> {
        let forward = (target - center).normalize();
        let right = forward.cross(up);
        if !(right.norm() > 1e-9) {
            return Err(Error::InvalidConfig("look-at up vector is parallel to the view direction"));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * center);
        Self::new(rotation, translation)
    }

    #[inline]
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn to_camera(&self, x_world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x_world + self.translation
    }

    #[inline]
    pub fn to_world(&self, x_cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (x_cam - self.translation)
    }

    /// Camera center in world coordinates, `-Rᵀt`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Rotates a world direction into the camera frame.
    #[inline]
    pub fn rotate_to_camera(&self, d: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * d
    }
}

/// Projects a world point into the image. No raster-bounds clamping.
pub fn project(pose: &CameraPose, intr: &CameraIntrinsics, x_world: &Vector3<f64>) -> Result<Pixel> {
    let x = pose.to_camera(x_world);
    if !(x.z > MIN_DEPTH) {
        return Err(Error::NonPositiveDepth(x.z));
    }
    Ok(intr.project_camera(&x))
}

/// Camera-frame point at depth `z` on the ray through `p`, `z K⁻¹ [p, 1]ᵀ`.
pub fn backproject_fronto(intr: &CameraIntrinsics, p: Pixel, z: f64) -> Result<Vector3<f64>> {
    if !(z > 0.0) {
        return Err(Error::NonPositiveDepth(z));
    }
    Ok(intr.ray(p) * z)
}

/// Per-view normal, reflectance and mask rasters, with optional ground-truth
/// depth. Normals are outward unit vectors in world coordinates; masked-out
/// texels carry arbitrary values.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMaps {
    pub(crate) normals: Raster<Vector3<f64>>,
    pub(crate) reflectance: Raster<ReflectanceVec>,
    pub(crate) mask: Raster<bool>,
    pub(crate) gt_depth: Option<Raster<f64>>,
    channels: usize,
}

impl ViewMaps {
    pub fn new(
        normals: Raster<Vector3<f64>>,
        reflectance: Raster<ReflectanceVec>,
        mask: Raster<bool>,
        gt_depth: Option<Raster<f64>>,
    ) -> Result<Self> {
        let (w, h) = normals.shape();
        reflectance.ensure_shape(w, h)?;
        mask.ensure_shape(w, h)?;
        if let Some(d) = &gt_depth {
            d.ensure_shape(w, h)?;
        }
        let channels = reflectance.data().first().map_or(1, |r| r.channels());
        for ((n, r), m) in normals.data().iter().zip(reflectance.data()).zip(mask.data()) {
            if r.channels() != channels {
                return Err(Error::InvalidMaps("inconsistent reflectance channel count"));
            }
            if !*m {
                continue;
            }
            if (n.norm() - 1.0).abs() > UNIT_NORMAL_TOL || !n.norm().is_finite() {
                return Err(Error::InvalidMaps("masked-in normal is not unit length"));
            }
            if r.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidMaps("reflectance must be finite and nonnegative"));
            }
        }
        Ok(Self { normals, reflectance, mask, gt_depth, channels })
    }

    /// Normal-only input: reflectance is set to white.
    pub fn from_normals(normals: Raster<Vector3<f64>>, mask: Raster<bool>, channels: usize) -> Result<Self> {
        let (w, h) = normals.shape();
        Self::new(normals, Raster::filled(w, h, ReflectanceVec::white(channels)), mask, None)
    }

    pub fn width(&self) -> usize {
        self.normals.width()
    }

    pub fn height(&self) -> usize {
        self.normals.height()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn normals(&self) -> &Raster<Vector3<f64>> {
        &self.normals
    }

    pub fn reflectance(&self) -> &Raster<ReflectanceVec> {
        &self.reflectance
    }

    pub fn mask(&self) -> &Raster<bool> {
        &self.mask
    }

    pub fn gt_depth(&self) -> Option<&Raster<f64>> {
        self.gt_depth.as_ref()
    }

    pub fn with_gt_depth(mut self, depth: Option<Raster<f64>>) -> Result<Self> {
        if let Some(d) = &depth {
            d.ensure_shape(self.width(), self.height())?;
        }
        self.gt_depth = depth;
        Ok(self)
    }

    pub fn valid_count(&self) -> usize {
        self.mask.data().iter().filter(|m| **m).count()
    }

    /// Number of masked-in texels whose normal does not face the camera,
    /// i.e. `n · (x − c) ≥ 0` for the point `x` seen through the texel.
    pub fn facing_violations(&self, pose: &CameraPose, intr: &CameraIntrinsics) -> usize {
        let mut count = 0;
        for y in 0..self.height() {
            for x in 0..self.width() {
                if !*self.mask.get(x, y) {
                    continue;
                }
                let view = pose.rotation().transpose() * intr.ray(Pixel::new(x as f64, y as f64));
                if self.normals.get(x, y).dot(&view) >= 0.0 {
                    count += 1;
                }
            }
        }
        count
    }
}

/// A view's maps with its calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub maps: ViewMaps,
    pub pose: CameraPose,
    pub intrinsics: CameraIntrinsics,
}

/// Result of [`bilinear_sample`]. Values are meaningless when `valid` is false.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub normal: Vector3<f64>,
    pub reflectance: ReflectanceVec,
    pub valid: bool,
}

impl Sample {
    fn invalid(channels: usize) -> Self {
        Self { normal: Vector3::zeros(), reflectance: ReflectanceVec::zeros(channels), valid: false }
    }
}

/// Bilinear blend of the four texels around `p`.
///
/// Texels with zero weight do not contribute. The sample is invalid when `p`
/// lies outside `[0, W−1] × [0, H−1]`, when a contributing texel is masked
/// out, or when the blended normal is shorter than [`MIN_BLENDED_NORM`]
/// before renormalisation.
#[inline]
pub fn bilinear_sample(maps: &ViewMaps, p: Pixel) -> Sample {
    let (w, h) = maps.normals.shape();
    let (max_u, max_v) = ((w - 1) as f64, (h - 1) as f64);
    if !(p.u >= 0.0 && p.u <= max_u && p.v >= 0.0 && p.v <= max_v) {
        return Sample::invalid(maps.channels);
    }
    let x0 = (p.u.floor() as usize).min(w.saturating_sub(2));
    let y0 = (p.v.floor() as usize).min(h.saturating_sub(2));
    let fx = p.u - x0 as f64;
    let fy = p.v - y0 as f64;
    let taps = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    let mut normal = Vector3::zeros();
    let mut refl = ReflectanceVec::zeros(maps.channels);
    for &(x, y, weight) in &taps {
        if weight == 0.0 {
            continue;
        }
        let i = y * w + x;
        if !maps.mask.data()[i] {
            return Sample::invalid(maps.channels);
        }
        normal += maps.normals.data()[i] * weight;
        for (dst, src) in refl.as_mut_slice().iter_mut().zip(maps.reflectance.data()[i].as_slice()) {
            *dst += src * weight;
        }
    }
    let norm = normal.norm();
    if !(norm >= MIN_BLENDED_NORM) {
        return Sample::invalid(maps.channels);
    }
    Sample { normal: normal / norm, reflectance: refl, valid: true }
}
