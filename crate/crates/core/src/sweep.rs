//! Depth sweeping over reference pixels.
//!
//! For a reference pixel, a patch of neighbouring pixels is lifted to 3D for
//! each depth hypothesis `z`, projected into every control view, and scored
//! by comparing the reference maps with the control maps sampled there. The
//! three patch models all place pixel `j` at `z · s_j` in the reference
//! camera frame, so the per-pixel geometry is computed once and every
//! hypothesis costs one multiply-add per point.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{bilinear_sample, CameraIntrinsics, View, ViewMaps, MIN_DEPTH};
use crate::integration::{integrate_patch, Patch, ScaleField};
use crate::raster::Raster;
use crate::reparam::{
    canonical_triplet, optimal_triplet, optimal_triplet_with_phase, LightTriplet, RadianceVec, ReflectanceVec,
};
use crate::search::{coarse_to_fine, Minimum};
use crate::{Error, Result};

/// Ray/plane incidence below which a slanted patch point is undefined.
pub const RAY_PLANE_EPS: f64 = 1e-9;

/// Local geometry assumed for the patch around a reference pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PatchModel {
    /// Every point at the center depth.
    #[cfg_attr(feature = "serde", serde(rename = "fronto"))]
    FrontoParallel,
    /// Plane through the center point, orthogonal to the center normal.
    Slanted,
    /// Depth scales integrated from the reference normals.
    Surface,
}

impl PatchModel {
    pub const ALL: [PatchModel; 3] = [PatchModel::FrontoParallel, PatchModel::Slanted, PatchModel::Surface];

    pub fn name(self) -> &'static str {
        match self {
            PatchModel::FrontoParallel => "fronto",
            PatchModel::Slanted => "slanted",
            PatchModel::Surface => "surface",
        }
    }

    pub fn requires_normals(self) -> bool {
        !matches!(self, PatchModel::FrontoParallel)
    }
}

/// Consistency loss between reference and control samples.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum Loss {
    /// `‖v₁ⱼ − vᵢⱼ(z)‖²` on re-parametrized radiance.
    Reparam,
    /// `(1 − n₁ⱼ·nᵢⱼ(z))² + μ ‖r₁ⱼ − rᵢⱼ(z)‖²`.
    Combined { mu: f64 },
}

impl Loss {
    pub fn name(&self) -> &'static str {
        match self {
            Loss::Reparam => "reparam",
            Loss::Combined { .. } => "combined",
        }
    }

    pub fn mu(&self) -> Option<f64> {
        match *self {
            Loss::Reparam => None,
            Loss::Combined { mu } => Some(mu),
        }
    }
}

/// Light triplet chosen for each reference pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum Illumination {
    /// Optimal triplet about the reference normal.
    #[default]
    Optimal,
    /// Identity lights; with white albedo the radiance is the normal.
    Canonical,
    /// Optimal triplet with a pseudo-random azimuth phase per pixel.
    RandomPhase { seed: u64 },
}

impl Illumination {
    pub fn triplet(&self, normal: &Vector3<f64>, pixel: (usize, usize)) -> LightTriplet {
        match *self {
            Illumination::Optimal => optimal_triplet(normal, 1.0),
            Illumination::Canonical => canonical_triplet(),
            Illumination::RandomPhase { seed } => {
                let h = splitmix64(seed ^ ((pixel.0 as u64) << 32 | pixel.1 as u64));
                let phase = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * core::f64::consts::TAU;
                optimal_triplet_with_phase(normal, 1.0, phase)
            }
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepConfig {
    pub z_min: f64,
    pub z_max: f64,
    pub coarse_samples: usize,
    pub refine_tol: f64,
    pub patch_radius: usize,
    pub model: PatchModel,
    pub loss: Loss,
    pub min_valid_views: usize,
    pub illumination: Illumination,
}

impl SweepConfig {
    pub const DEFAULT_COARSE_SAMPLES: usize = 256;
    pub const DEFAULT_REFINE_TOL: f64 = 1e-6;
    pub const DEFAULT_PATCH_RADIUS: usize = 3;

    pub fn new(z_min: f64, z_max: f64, model: PatchModel) -> Self {
        Self {
            z_min,
            z_max,
            coarse_samples: Self::DEFAULT_COARSE_SAMPLES,
            refine_tol: Self::DEFAULT_REFINE_TOL,
            patch_radius: Self::DEFAULT_PATCH_RADIUS,
            model,
            loss: Loss::Reparam,
            min_valid_views: 1,
            illumination: Illumination::Optimal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z_min > 0.0 && self.z_min < self.z_max && self.z_max.is_finite()) {
            return Err(Error::InvalidConfig("depth range must satisfy 0 < z_min < z_max"));
        }
        if self.coarse_samples < 16 {
            return Err(Error::InvalidConfig("at least 16 coarse samples are required"));
        }
        if !(self.refine_tol > 0.0 && self.refine_tol <= 1e-2) {
            return Err(Error::InvalidConfig("refine_tol must lie in (0, 1e-2]"));
        }
        if self.min_valid_views == 0 {
            return Err(Error::InvalidConfig("min_valid_views must be at least 1"));
        }
        if let Loss::Combined { mu } = self.loss {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(Error::InvalidConfig("mu must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// Scales `s_j` such that patch pixel `j` sits at `z · s_j` in the reference
/// camera frame for center depth `z`.
pub fn patch_rays(model: PatchModel, patch: &Patch, intr: &CameraIntrinsics) -> Result<Vec<Vector3<f64>>> {
    let rays = (0..patch.len()).map(|j| intr.ray(patch.pixel(j)));
    match model {
        PatchModel::FrontoParallel => Ok(rays.collect()),
        PatchModel::Slanted => {
            let n = patch.center_normal();
            let offset = n.dot(&intr.ray(patch.pixel(patch.center_index())));
            rays.map(|d| {
                let incidence = n.dot(&d);
                if incidence.abs() < RAY_PLANE_EPS * d.norm() {
                    return Err(Error::RayPlaneParallel);
                }
                Ok(d * (offset / incidence))
            })
            .collect()
        }
        PatchModel::Surface => {
            let scales = integrate_patch(intr, patch)?.scales;
            Ok(scale_rays(rays, &scales))
        }
    }
}

fn scale_rays(rays: impl Iterator<Item = Vector3<f64>>, scales: &ScaleField) -> Vec<Vector3<f64>> {
    rays.zip(scales.alphas()).map(|(d, a)| d * *a).collect()
}

/// Reference-camera-frame points of the patch at center depth `z`.
pub fn patch_points(model: PatchModel, z: f64, patch: &Patch, intr: &CameraIntrinsics) -> Result<Vec<Vector3<f64>>> {
    if !(z > 0.0) {
        return Err(Error::NonPositiveDepth(z));
    }
    Ok(patch_rays(model, patch, intr)?.into_iter().map(|s| s * z).collect())
}

/// Surface-model points for an explicit scale field, `z α_j K⁻¹[p_j, 1]ᵀ`.
pub fn surface_points(z: f64, patch: &Patch, intr: &CameraIntrinsics, scales: &ScaleField) -> Vec<Vector3<f64>> {
    scale_rays((0..patch.len()).map(|j| intr.ray(patch.pixel(j))), scales).into_iter().map(|s| s * z).collect()
}

/// Projection of reference-camera points into a control image,
/// `h = K_i (M_i x + b_i)` with `M_i = R_i R_refᵀ`, `b_i = t_i − M_i t_ref`.
#[derive(Debug, Clone, Copy)]
struct RelativeProjection {
    linear: Matrix3<f64>,
    offset: Vector3<f64>,
}

impl RelativeProjection {
    fn new(reference: &View, control: &View) -> Self {
        let m = control.pose.rotation() * reference.pose.rotation().transpose();
        let b = control.pose.translation() - m * reference.pose.translation();
        let k = control.intrinsics.matrix();
        Self { linear: k * m, offset: k * b }
    }
}

/// Reference-side data of one patch pixel.
#[derive(Debug, Clone, Copy)]
struct RefTerm {
    lights: LightTriplet,
    radiance: RadianceVec,
    normal: Vector3<f64>,
    reflectance: ReflectanceVec,
}

/// Everything needed to score depth hypotheses at one reference pixel.
#[derive(Debug, Clone)]
pub struct PatchProblem<'a> {
    controls: Vec<&'a ViewMaps>,
    terms: Vec<RefTerm>,
    /// Homogeneous image direction per (control, pixel), row-major by control.
    directions: Vec<Vector3<f64>>,
    offsets: Vec<Vector3<f64>>,
    loss: Loss,
    min_valid_views: usize,
}

impl<'a> PatchProblem<'a> {
    /// Builds the problem for a prepared patch. The patch normals must be the
    /// reference normals rotated into the reference camera frame.
    pub fn new(
        reference: &View,
        controls: &[&'a View],
        patch: &Patch,
        model: PatchModel,
        loss: Loss,
        illumination: Illumination,
        min_valid_views: usize,
    ) -> Result<Self> {
        let rays = patch_rays(model, patch, &reference.intrinsics)?;
        Ok(Self::with_rays(reference, controls, patch, &rays, loss, illumination, min_valid_views))
    }

    fn with_rays(
        reference: &View,
        controls: &[&'a View],
        patch: &Patch,
        rays: &[Vector3<f64>],
        loss: Loss,
        illumination: Illumination,
        min_valid_views: usize,
    ) -> Self {
        let maps = &reference.maps;
        let terms = patch
            .pixels()
            .iter()
            .map(|&(x, y)| {
                let normal = *maps.normals.get(x, y);
                let reflectance = *maps.reflectance.get(x, y);
                let lights = illumination.triplet(&normal, (x, y));
                RefTerm {
                    lights,
                    radiance: RadianceVec::from_shading(&lights.shade(&normal), &reflectance),
                    normal,
                    reflectance,
                }
            })
            .collect();
        let mut directions = Vec::with_capacity(controls.len() * rays.len());
        let mut offsets = Vec::with_capacity(controls.len());
        for control in controls {
            let proj = RelativeProjection::new(reference, control);
            directions.extend(rays.iter().map(|s| proj.linear * s));
            offsets.push(proj.offset);
        }
        Self { controls: controls.iter().map(|v| &v.maps).collect(), terms, directions, offsets, loss, min_valid_views }
    }

    /// Mean loss over valid (view, pixel) terms at center depth `z`.
    pub fn cost(&self, z: f64) -> Result<f64> {
        let m = self.terms.len();
        let mut total = 0.0;
        let mut count = 0usize;
        let mut views = 0usize;
        for (i, maps) in self.controls.iter().enumerate() {
            let offset = self.offsets[i];
            let mut contributed = false;
            for (term, dir) in self.terms.iter().zip(&self.directions[i * m..(i + 1) * m]) {
                let h = dir * z + offset;
                if !(h.z > MIN_DEPTH) {
                    continue;
                }
                let sample = bilinear_sample(maps, crate::Pixel::new(h.x / h.z, h.y / h.z));
                if !sample.valid {
                    continue;
                }
                total += match self.loss {
                    Loss::Reparam => {
                        let shaded = term.lights.shade(&sample.normal);
                        term.radiance.distance_sq(&RadianceVec::from_shading(&shaded, &sample.reflectance))
                    }
                    Loss::Combined { mu } => {
                        let geom = 1.0 - term.normal.dot(&sample.normal);
                        geom * geom + mu * term.reflectance.distance_sq(&sample.reflectance)
                    }
                };
                count += 1;
                contributed = true;
            }
            views += contributed as usize;
        }
        if views < self.min_valid_views || count == 0 {
            return Err(Error::TooFewValidViews { found: views, required: self.min_valid_views });
        }
        Ok(total / count as f64)
    }
}

/// Reference patch around `center`: masked-in texels within the window, with
/// normals rotated into the reference camera frame.
pub fn reference_patch(reference: &View, center: (usize, usize), radius: usize) -> Result<Patch> {
    let maps = &reference.maps;
    if center.0 >= maps.width() || center.1 >= maps.height() || !*maps.mask.get(center.0, center.1) {
        return Err(Error::InvalidPatch("center is masked out"));
    }
    Patch::gather(center, radius, maps.width(), maps.height(), |x, y| {
        maps.mask.get(x, y).then(|| reference.pose.rotate_to_camera(maps.normals.get(x, y)))
    })
}

/// Re-parametrized consistency cost of depth `z` at the patch.
pub fn reparam_cost(
    z: f64,
    patch: &Patch,
    reference: &View,
    controls: &[&View],
    model: PatchModel,
    illumination: Illumination,
) -> Result<f64> {
    PatchProblem::new(reference, controls, patch, model, Loss::Reparam, illumination, 1)?.cost(z)
}

/// Two-term normal/reflectance cost of depth `z` at the patch.
pub fn combined_cost(
    z: f64,
    patch: &Patch,
    reference: &View,
    controls: &[&View],
    model: PatchModel,
    mu: f64,
) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidConfig("mu must be nonnegative"));
    }
    PatchProblem::new(reference, controls, patch, model, Loss::Combined { mu }, Illumination::Optimal, 1)?.cost(z)
}

/// Per-pixel depth sweeps against a fixed reference view.
///
/// Holds only shared references, so it can be driven from several threads;
/// each pixel's result depends on nothing but its own inputs.
#[derive(Debug, Clone)]
pub struct DepthSweeper<'a> {
    reference: &'a View,
    controls: Vec<&'a View>,
    config: SweepConfig,
}

impl<'a> DepthSweeper<'a> {
    pub fn new(views: &'a [View], reference: usize, config: SweepConfig) -> Result<Self> {
        if views.len() < 2 {
            return Err(Error::InsufficientViews { found: views.len(), required: 2 });
        }
        if reference >= views.len() {
            return Err(Error::InvalidConfig("reference view index out of range"));
        }
        config.validate()?;
        Ok(Self {
            reference: &views[reference],
            controls: views.iter().enumerate().filter(|(i, _)| *i != reference).map(|(_, v)| v).collect(),
            config,
        })
    }

    pub fn config(&self) -> &SweepConfig {
        &self.config
    }

    pub fn reference(&self) -> &View {
        self.reference
    }

    pub fn problem(&self, x: usize, y: usize) -> Result<PatchProblem<'a>> {
        let patch = reference_patch(self.reference, (x, y), self.config.patch_radius)?;
        PatchProblem::new(
            self.reference,
            &self.controls,
            &patch,
            self.config.model,
            self.config.loss,
            self.config.illumination,
            self.config.min_valid_views,
        )
    }

    /// Coarse scan over `[z_min, z_max]` then golden-section refinement.
    pub fn sweep_pixel(&self, x: usize, y: usize) -> Result<Minimum> {
        let problem = self.problem(x, y)?;
        let c = &self.config;
        coarse_to_fine(|z| problem.cost(z).ok(), c.z_min, c.z_max, c.coarse_samples, c.refine_tol)
            .ok_or(Error::NoValidHypothesis)
    }

    /// Sweeps every masked-in reference pixel in raster order.
    pub fn reconstruct(&self) -> DepthResult {
        let maps = &self.reference.maps;
        DepthResult::from_fn(maps.width(), maps.height(), |x, y| {
            if *maps.mask.get(x, y) {
                self.sweep_pixel(x, y).ok()
            } else {
                None
            }
        })
    }
}

/// Sweeps the pixel at `center` of view `reference`.
pub fn sweep_pixel(
    views: &[View],
    reference: usize,
    center: (usize, usize),
    config: &SweepConfig,
) -> Result<(f64, f64)> {
    let m = DepthSweeper::new(views, reference, *config)?.sweep_pixel(center.0, center.1)?;
    Ok((m.x, m.value))
}

/// Depth map of view `reference`. Invalid pixels hold NaN depth and cost.
pub fn reconstruct_depth_map(views: &[View], reference: usize, config: &SweepConfig) -> Result<DepthResult> {
    Ok(DepthSweeper::new(views, reference, *config)?.reconstruct())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthResult {
    pub depth: Raster<f64>,
    pub cost: Raster<f64>,
    pub valid: Raster<bool>,
}

impl DepthResult {
    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> Option<Minimum>) -> Self {
        let outcomes = Raster::from_fn(width, height, f);
        Self::from_outcomes(&outcomes)
    }

    pub fn from_outcomes(outcomes: &Raster<Option<Minimum>>) -> Self {
        Self {
            depth: outcomes.map(|o| o.map_or(f64::NAN, |m| m.x)),
            cost: outcomes.map(|o| o.map_or(f64::NAN, |m| m.value)),
            valid: outcomes.map(|o| o.is_some()),
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.data().iter().filter(|v| **v).count()
    }
}
