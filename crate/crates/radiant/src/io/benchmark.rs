//! Benchmark directories: per-view PFM maps, `cameras.json` and a
//! `benchmark.json` manifest describing how the data was generated.

use std::fs;
use std::path::{Path, PathBuf};

use radiant_core::geometry::{CameraIntrinsics, CameraPose};
use radiant_core::synth::SynthConfig;
use radiant_core::{Raster, ReflectanceVec, Vector3, View, ViewMaps};
use serde::{Deserialize, Serialize};

use super::cameras::{read_cameras, write_cameras};
use super::pfm::{read_pfm, write_pfm, PfmImage};
use super::{io_err, IoError, Result};

pub const MANIFEST_FILE: &str = "benchmark.json";
pub const CAMERAS_FILE: &str = "cameras.json";
pub const VERSION: &str = "radiant-benchmark/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewFiles {
    /// Absent for data sets without normal maps.
    pub normals: Option<String>,
    pub reflectance: String,
    pub mask: String,
    pub gt_depth: Option<String>,
}

impl ViewFiles {
    fn numbered(index: usize) -> Self {
        Self {
            normals: Some(format!("normals_{index:02}.pfm")),
            reflectance: format!("reflectance_{index:02}.pfm"),
            mask: format!("mask_{index:02}.pfm"),
            gt_depth: Some(format!("gt_depth_{index:02}.pfm")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub version: String,
    pub config: SynthConfig,
    pub seed: u64,
    /// Default sweep bracket for reconstructions of this benchmark.
    pub z_range: [f64; 2],
    pub cameras: String,
    pub files: Vec<ViewFiles>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub manifest: BenchmarkManifest,
    pub views: Vec<View>,
}

impl Benchmark {
    pub fn has_normals(&self) -> bool {
        self.manifest.files.iter().all(|f| f.normals.is_some())
    }
}

fn mask_image(mask: &Raster<bool>) -> PfmImage {
    PfmImage::from_scalar(&mask.map(|m| if *m { 1.0 } else { 0.0 }))
}

fn reflectance_image(maps: &ViewMaps) -> PfmImage {
    let r = maps.reflectance();
    let channels = maps.channels();
    PfmImage {
        width: r.width(),
        height: r.height(),
        channels,
        data: r.data().iter().flat_map(|v| v.as_slice().iter().map(|c| *c as f32)).collect(),
    }
}

/// Writes every view and the manifest into `dir`, which must exist.
pub fn write_benchmark(
    dir: &Path,
    config: &SynthConfig,
    z_range: [f64; 2],
    views: &[View],
) -> Result<BenchmarkManifest> {
    let mut files = Vec::with_capacity(views.len());
    for (i, view) in views.iter().enumerate() {
        let names = ViewFiles::numbered(i);
        let maps = &view.maps;
        write_pfm(&dir.join(names.normals.as_deref().unwrap_or_default()), &PfmImage::from_vectors(maps.normals()))?;
        write_pfm(&dir.join(&names.reflectance), &reflectance_image(maps))?;
        write_pfm(&dir.join(&names.mask), &mask_image(maps.mask()))?;
        let zero = Raster::filled(maps.width(), maps.height(), 0.0);
        let depth = maps.gt_depth().unwrap_or(&zero);
        write_pfm(&dir.join(names.gt_depth.as_deref().unwrap_or_default()), &PfmImage::from_scalar(depth))?;
        files.push(names);
    }
    let cameras: Vec<(CameraIntrinsics, CameraPose)> = views.iter().map(|v| (v.intrinsics, v.pose)).collect();
    write_cameras(&dir.join(CAMERAS_FILE), &cameras)?;
    let manifest = BenchmarkManifest {
        version: VERSION.to_owned(),
        config: config.clone(),
        seed: config.noise.seed,
        z_range,
        cameras: CAMERAS_FILE.to_owned(),
        files,
    };
    write_manifest(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &BenchmarkManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<BenchmarkManifest> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: BenchmarkManifest =
        serde_json::from_str(&text).map_err(|e| IoError::SchemaError(format!("{}: {e}", path.display())))?;
    if manifest.version != VERSION {
        return Err(IoError::UnsupportedVersion(manifest.version));
    }
    Ok(manifest)
}

fn shape_check(path: &Path, image: &PfmImage, intr: &CameraIntrinsics, channels: &[usize]) -> Result<()> {
    if image.width != intr.width || image.height != intr.height || !channels.contains(&image.channels) {
        return Err(IoError::SchemaError(format!(
            "{}: {}x{}x{} does not match camera {}x{}",
            path.display(),
            image.width,
            image.height,
            image.channels,
            intr.width,
            intr.height
        )));
    }
    Ok(())
}

/// Loads a benchmark directory. Normals are renormalized after the 32-bit
/// round trip. Views without normal maps get one shared placeholder normal,
/// which makes every normal-dependent term constant across views.
pub fn read_benchmark(dir: &Path) -> Result<Benchmark> {
    let manifest = read_manifest(&dir.join(MANIFEST_FILE))?;
    let cameras = read_cameras(&dir.join(&manifest.cameras))?;
    if cameras.len() != manifest.files.len() {
        return Err(IoError::SchemaError(format!("{} cameras for {} views", cameras.len(), manifest.files.len())));
    }
    let placeholder = -cameras.first().map(|(_, pose)| pose.rotation().row(2).transpose()).unwrap_or_else(Vector3::z);
    let mut views = Vec::with_capacity(cameras.len());
    for (files, (intr, pose)) in manifest.files.iter().zip(cameras) {
        let load = |name: &str, channels: &[usize]| -> Result<(PathBuf, PfmImage)> {
            let path = dir.join(name);
            let image = read_pfm(&path)?;
            shape_check(&path, &image, &intr, channels)?;
            Ok((path, image))
        };
        let (mask_path, mask) = load(&files.mask, &[1])?;
        let mask = mask.to_scalar()?.map(|v| *v > 0.5);
        let normals = match &files.normals {
            Some(name) => {
                let (_, image) = load(name, &[3])?;
                let raw = image.to_vectors()?;
                Raster::from_fn(raw.width(), raw.height(), |x, y| {
                    let n = *raw.get(x, y);
                    if *mask.get(x, y) {
                        n.normalize()
                    } else {
                        n
                    }
                })
            }
            None => Raster::filled(intr.width, intr.height, placeholder),
        };
        let (_, refl) = load(&files.reflectance, &[1, 3])?;
        let reflectance = Raster::from_fn(intr.width, intr.height, |x, y| {
            let values: Vec<f64> = refl.pixel(x, y).iter().map(|v| *v as f64).collect();
            ReflectanceVec::from_slice(&values).expect("one or three channels")
        });
        let gt_depth = match &files.gt_depth {
            Some(name) => Some(load(name, &[1])?.1.to_scalar()?),
            None => None,
        };
        let maps = ViewMaps::new(normals, reflectance, mask, gt_depth)
            .map_err(|source| IoError::Invalid { path: mask_path.clone(), source })?;
        views.push(View { maps, pose, intrinsics: intr });
    }
    Ok(Benchmark { manifest, views })
}
