//! Synthetic benchmark: a height field made of two Gaussian bumps over a base
//! plane, a piecewise-linear reflectance, ray-cast views on a turntable arc,
//! and seeded noise models.
//!
//! World `Z` grows away from the cameras. The surface is
//! `Z(x, y) = base − Σ aᵢ exp(−‖(x, y) − cᵢ‖² / 2σᵢ²)`, so bumps rise toward
//! the cameras, and outward normals point to `−Z`.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::geometry::{CameraIntrinsics, CameraPose, Pixel, View, ViewMaps};
use crate::raster::Raster;
use crate::reparam::{tangent_frame, ReflectanceVec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianBump {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub sigma: f64,
}

impl GaussianBump {
    #[inline]
    fn value(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        self.amplitude * (-(dx * dx + dy * dy) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Axis-aligned rectangle of the `(x, y)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Support {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Support {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianSurface {
    pub bumps: [GaussianBump; 2],
    pub base_depth: f64,
    pub support: Support,
}

impl Default for GaussianSurface {
    fn default() -> Self {
        Self {
            bumps: [
                GaussianBump { amplitude: 0.3, center: [-0.25, -0.15], sigma: 0.4 },
                GaussianBump { amplitude: 0.2, center: [0.35, 0.3], sigma: 0.3 },
            ],
            base_depth: 0.0,
            support: Support { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0 },
        }
    }
}

impl GaussianSurface {
    pub fn validate(&self) -> Result<()> {
        let s = &self.support;
        if self.bumps.iter().any(|b| !(b.sigma > 0.0) || !b.amplitude.is_finite()) {
            return Err(Error::InvalidConfig("bump sigmas must be positive"));
        }
        if !(s.x_min < s.x_max && s.y_min < s.y_max) {
            return Err(Error::InvalidConfig("support must have positive extent"));
        }
        Ok(())
    }

    /// `Z(x, y)`.
    #[inline]
    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.base_depth - self.bumps.iter().map(|b| b.value(x, y)).sum::<f64>()
    }

    /// `(∂Z/∂x, ∂Z/∂y)` in closed form.
    #[inline]
    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for b in &self.bumps {
            let v = b.value(x, y);
            let s2 = b.sigma * b.sigma;
            g[0] += v * (x - b.center[0]) / s2;
            g[1] += v * (y - b.center[1]) / s2;
        }
        g
    }

    pub fn sigma_min(&self) -> f64 {
        self.bumps.iter().map(|b| b.sigma).fold(f64::INFINITY, f64::min)
    }

    /// Range of `Z` that any surface point can take.
    pub fn height_bounds(&self) -> (f64, f64) {
        let rise: f64 = self.bumps.iter().map(|b| b.amplitude.max(0.0)).sum();
        let dip: f64 = self.bumps.iter().map(|b| (-b.amplitude).max(0.0)).sum();
        (self.base_depth - rise, self.base_depth + dip)
    }

    /// `max Z − min Z` over a 201×201 grid of the support.
    pub fn height_span(&self) -> f64 {
        let (lo, hi) = self.grid_fold(201, (f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z), hi.max(z)));
        hi - lo
    }

    /// Support center at the mean height over a 201×201 grid.
    pub fn centroid(&self) -> Vector3<f64> {
        let n = 201;
        let sum = self.grid_fold(n, 0.0, |acc, z| acc + z);
        let c = self.support.center();
        Vector3::new(c[0], c[1], sum / (n * n) as f64)
    }

    fn grid_fold<A>(&self, n: usize, init: A, mut f: impl FnMut(A, f64) -> A) -> A {
        let s = &self.support;
        let mut acc = init;
        for iy in 0..n {
            let y = s.y_min + (s.y_max - s.y_min) * iy as f64 / (n - 1) as f64;
            for ix in 0..n {
                let x = s.x_min + (s.x_max - s.x_min) * ix as f64 / (n - 1) as f64;
                acc = f(acc, self.height(x, y));
            }
        }
        acc
    }
}

/// Analytic outward (camera-facing) unit normal, `normalize(∂Z/∂x, ∂Z/∂y, −1)`.
pub fn surface_normal(surface: &GaussianSurface, x: f64, y: f64) -> Vector3<f64> {
    let [gx, gy] = surface.gradient(x, y);
    Vector3::new(gx, gy, -1.0).normalize()
}

/// Reflectance that varies linearly inside 4 equal bands along `x`.
///
/// `values[c][k]` is channel `c` at the `k`-th of the 5 band edges, which
/// split the support's x extent evenly.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReflectanceBands {
    pub x_min: f64,
    pub x_max: f64,
    pub values: Vec<[f64; 5]>,
}

impl Default for ReflectanceBands {
    fn default() -> Self {
        Self {
            x_min: -1.0,
            x_max: 1.0,
            values: alloc::vec![[0.2, 0.35, 0.55, 0.7, 0.9], [0.9, 0.75, 0.6, 0.4, 0.25], [0.3, 0.45, 0.6, 0.7, 0.85],],
        }
    }
}

impl ReflectanceBands {
    pub const BANDS: usize = 4;

    pub fn channels(&self) -> usize {
        self.values.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.values.len(), 1 | 3) {
            return Err(Error::UnsupportedChannels(self.values.len()));
        }
        if !(self.x_min < self.x_max) {
            return Err(Error::InvalidConfig("reflectance bands need x_min < x_max"));
        }
        if self.values.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("reflectance values must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Band edges along x.
    pub fn edges(&self) -> [f64; 5] {
        core::array::from_fn(|k| self.x_min + (self.x_max - self.x_min) * k as f64 / Self::BANDS as f64)
    }
}

/// Evaluates the band reflectance at `(x, y)`; `x` is clamped to the bands.
pub fn piecewise_linear_reflectance(bands: &ReflectanceBands, x: f64, _y: f64) -> ReflectanceVec {
    let width = (bands.x_max - bands.x_min) / ReflectanceBands::BANDS as f64;
    let t = ((x - bands.x_min) / width).clamp(0.0, ReflectanceBands::BANDS as f64);
    let k = (t.floor() as usize).min(ReflectanceBands::BANDS - 1);
    let f = t - k as f64;
    let mut out = ReflectanceVec::zeros(bands.channels());
    for (dst, v) in out.as_mut_slice().iter_mut().zip(&bands.values) {
        *dst = v[k] + (v[k + 1] - v[k]) * f;
    }
    out
}

/// Cameras on a horizontal arc around the look-at target.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TurntableConfig {
    pub count: usize,
    pub radius: f64,
    pub elevation_deg: f64,
    pub start_azimuth_deg: f64,
    pub span_deg: f64,
}

impl Default for TurntableConfig {
    fn default() -> Self {
        Self { count: 5, radius: 4.0, elevation_deg: 65.0, start_azimuth_deg: -90.0, span_deg: 72.0 }
    }
}

/// `count` cameras at `radius` from `target`, `elevation_deg` above the
/// `(x, y)` plane (toward `−Z`), evenly spaced over `span_deg` of azimuth,
/// all looking at `target`.
pub fn turntable_cameras(config: &TurntableConfig, target: &Vector3<f64>) -> Result<Vec<CameraPose>> {
    if config.count < 2 {
        return Err(Error::InsufficientViews { found: config.count, required: 2 });
    }
    if !(config.radius > 0.0) || !(config.elevation_deg > 0.0 && config.elevation_deg < 90.0) {
        return Err(Error::InvalidConfig("turntable needs radius > 0 and elevation in (0°, 90°)"));
    }
    let el = config.elevation_deg.to_radians();
    let step = config.span_deg / (config.count - 1) as f64;
    (0..config.count)
        .map(|k| {
            let az = (config.start_azimuth_deg + step * k as f64).to_radians();
            let offset = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), -el.sin()) * config.radius;
            CameraPose::look_at(&(target + offset), target, &Vector3::new(0.0, 0.0, -1.0))
        })
        .collect()
}

/// Ray-casts the surface. Pixels whose first hit lies outside the support,
/// or whose ray never descends toward the surface, are masked out.
pub fn render_view(
    surface: &GaussianSurface,
    bands: &ReflectanceBands,
    pose: &CameraPose,
    intr: &CameraIntrinsics,
) -> ViewMaps {
    let center = pose.center();
    let (z_top, z_bottom) = surface.height_bounds();
    let step_len = surface.sigma_min() / 4.0;
    let channels = bands.channels();
    let mut normals = Raster::filled(intr.width, intr.height, Vector3::zeros());
    let mut reflectance = Raster::filled(intr.width, intr.height, ReflectanceVec::zeros(channels));
    let mut mask = Raster::filled(intr.width, intr.height, false);
    let mut depth = Raster::filled(intr.width, intr.height, 0.0);
    let rot_t = pose.rotation().transpose();
    for y in 0..intr.height {
        for x in 0..intr.width {
            let dir = rot_t * intr.ray(Pixel::new(x as f64, y as f64));
            let Some(t) = intersect(surface, &center, &dir, z_top, z_bottom, step_len) else {
                continue;
            };
            let hit = center + dir * t;
            if !surface.support.contains(hit.x, hit.y) {
                continue;
            }
            normals.set(x, y, surface_normal(surface, hit.x, hit.y));
            reflectance.set(x, y, piecewise_linear_reflectance(bands, hit.x, hit.y));
            mask.set(x, y, true);
            depth.set(x, y, t);
        }
    }
    ViewMaps::new(normals, reflectance, mask, Some(depth)).expect("rendered maps are well-formed")
}

/// First crossing of `center + t·dir` with the height field, `t` being the
/// camera depth. Marches in steps no longer than `step_len`, then bisects.
fn intersect(
    surface: &GaussianSurface,
    center: &Vector3<f64>,
    dir: &Vector3<f64>,
    z_top: f64,
    z_bottom: f64,
    step_len: f64,
) -> Option<f64> {
    if !(dir.z > 0.0) {
        return None;
    }
    let g = |t: f64| {
        let p = center + dir * t;
        p.z - surface.height(p.x, p.y)
    };
    let t_start = ((z_top - center.z) / dir.z).max(0.0);
    let t_end = (z_bottom - center.z) / dir.z;
    if t_end <= 0.0 {
        return None;
    }
    let dt = step_len / dir.norm();
    let mut lo = t_start;
    if g(lo) >= 0.0 {
        return (lo > 0.0).then_some(lo);
    }
    let mut hi;
    loop {
        hi = (lo + dt).min(t_end);
        if g(hi) >= 0.0 {
            break;
        }
        if hi >= t_end {
            return None;
        }
        lo = hi;
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Noise injected into rendered maps. Each view draws from its own stream
/// of a ChaCha8 generator seeded with `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseSpec {
    pub normal_sigma_deg: f64,
    pub reflectance_sigma_frac: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.normal_sigma_deg >= 0.0 && self.reflectance_sigma_frac >= 0.0) {
            return Err(Error::InvalidConfig("noise sigmas must be nonnegative"));
        }
        Ok(())
    }
}

fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rotates each masked-in normal about a uniformly random tangent axis by a
/// zero-mean Gaussian angle of std `normal_sigma_deg`.
pub fn add_normal_noise(maps: &ViewMaps, spec: &NoiseSpec, stream: u64) -> ViewMaps {
    let mut out = maps.clone();
    if spec.normal_sigma_deg == 0.0 {
        return out;
    }
    let sigma = spec.normal_sigma_deg.to_radians();
    let mut rng = noise_rng(spec.seed, 2 * stream);
    let mask = maps.mask.data();
    for (n, _) in out.normals.data_mut().iter_mut().zip(mask).filter(|(_, m)| **m) {
        let phi = rng.random::<f64>() * TAU;
        let angle: f64 = StandardNormal.sample(&mut rng);
        *n = perturb_normal(n, phi, sigma * angle);
    }
    out
}

/// Rotation of unit `n` by `angle` about the tangent axis at azimuth `phi`.
pub fn perturb_normal(n: &Vector3<f64>, phi: f64, angle: f64) -> Vector3<f64> {
    let (t1, t2) = tangent_frame(n);
    let axis = t1 * phi.cos() + t2 * phi.sin();
    (n * angle.cos() + axis.cross(n) * angle.sin()).normalize()
}

/// Additive Gaussian noise of std `reflectance_sigma_frac × max reflectance`,
/// clamped to `[0, 1]`.
pub fn add_reflectance_noise(maps: &ViewMaps, spec: &NoiseSpec, stream: u64) -> ViewMaps {
    let mut out = maps.clone();
    if spec.reflectance_sigma_frac == 0.0 {
        return out;
    }
    let mask = maps.mask.data();
    let max =
        maps.reflectance.data().iter().zip(mask).filter(|(_, m)| **m).map(|(r, _)| r.max_value()).fold(0.0, f64::max);
    let Ok(normal) = Normal::new(0.0, spec.reflectance_sigma_frac * max) else {
        return out;
    };
    let mut rng = noise_rng(spec.seed, 2 * stream + 1);
    for (r, _) in out.reflectance.data_mut().iter_mut().zip(mask).filter(|(_, m)| **m) {
        for v in r.as_mut_slice() {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    out
}

/// Everything needed to regenerate a benchmark.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthConfig {
    pub surface: GaussianSurface,
    pub reflectance: ReflectanceBands,
    pub cameras: TurntableConfig,
    pub intrinsics: CameraIntrinsics,
    #[cfg_attr(feature = "serde", serde(default))]
    pub noise: NoiseSpec,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            surface: GaussianSurface::default(),
            reflectance: ReflectanceBands::default(),
            cameras: TurntableConfig::default(),
            intrinsics: CameraIntrinsics { fx: 360.0, fy: 360.0, cx: 127.5, cy: 127.5, width: 256, height: 256 },
            noise: NoiseSpec::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.surface.validate()?;
        self.reflectance.validate()?;
        self.intrinsics.validate()?;
        self.noise.validate()?;
        if self.cameras.count < 2 {
            return Err(Error::InsufficientViews { found: self.cameras.count, required: 2 });
        }
        Ok(())
    }

    pub fn poses(&self) -> Result<Vec<CameraPose>> {
        turntable_cameras(&self.cameras, &self.surface.centroid())
    }

    /// Camera distance ± 3× the surface height span.
    pub fn depth_range(&self) -> (f64, f64) {
        let margin = 3.0 * self.surface.height_span();
        ((self.cameras.radius - margin).max(1e-3), self.cameras.radius + margin)
    }
}

/// Renders all views and applies the configured noise (view `i` uses noise
/// stream `i`).
pub fn generate(config: &SynthConfig) -> Result<Vec<View>> {
    config.validate()?;
    config
        .poses()?
        .into_iter()
        .enumerate()
        .map(|(i, pose)| {
            let maps = render_view(&config.surface, &config.reflectance, &pose, &config.intrinsics);
            Ok(View { maps: apply_noise(&maps, &config.noise, i as u64), pose, intrinsics: config.intrinsics })
        })
        .collect()
}

/// Normal noise then reflectance noise, both from `spec`.
pub fn apply_noise(maps: &ViewMaps, spec: &NoiseSpec, stream: u64) -> ViewMaps {
    let noisy = add_normal_noise(maps, spec, stream);
    add_reflectance_noise(&noisy, spec, stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_far_from_bumps() {
        let s = GaussianSurface::default();
        let n = surface_normal(&s, 30.0, -30.0);
        assert!((n - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
    }

    #[test]
    fn single_bump_center_is_critical() {
        let mut s = GaussianSurface::default();
        s.bumps[1].amplitude = 0.0;
        let c = s.bumps[0].center;
        assert_eq!(surface_normal(&s, c[0], c[1]), Vector3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn reflectance_band_interior_and_continuity() {
        let b = ReflectanceBands::default();
        let e = b.edges();
        let mid = piecewise_linear_reflectance(&b, 0.5 * (e[1] + e[2]), 0.0);
        assert!((mid.as_slice()[0] - 0.5 * (0.35 + 0.55)).abs() < 1e-15);
        for edge in &e[1..4] {
            let left = piecewise_linear_reflectance(&b, edge - 1e-12, 0.0);
            let right = piecewise_linear_reflectance(&b, edge + 1e-12, 0.0);
            for (l, r) in left.as_slice().iter().zip(right.as_slice()) {
                assert!((l - r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn turntable_needs_two_views() {
        let cfg = TurntableConfig { count: 1, ..TurntableConfig::default() };
        assert!(matches!(turntable_cameras(&cfg, &Vector3::zeros()), Err(Error::InsufficientViews { .. })));
    }

    #[test]
    fn zero_noise_is_identity() {
        let cfg = SynthConfig {
            intrinsics: CameraIntrinsics::new(40.0, 40.0, 15.5, 15.5, 32, 32).unwrap(),
            ..SynthConfig::default()
        };
        let pose = cfg.poses().unwrap()[0];
        let maps = render_view(&cfg.surface, &cfg.reflectance, &pose, &cfg.intrinsics);
        assert_eq!(apply_noise(&maps, &NoiseSpec::default(), 0), maps);
    }
}
