use std::fs;
use std::path::Path;

use radiant_core::geometry::{CameraIntrinsics, CameraPose};
use radiant_core::synth::{generate, SynthConfig};
use radiant_core::{Raster, Vector3};
use radiant_sweep::io::benchmark::{read_benchmark, read_manifest, write_benchmark, write_manifest, MANIFEST_FILE};
use radiant_sweep::io::cameras::{read_cameras, write_cameras};
use radiant_sweep::io::pfm::{read_pfm, write_pfm, PfmImage};
use radiant_sweep::io::ply::{read_ply_points, write_ply_points};
use radiant_sweep::io::results::{read_results, write_results, ResultRow};
use radiant_sweep::io::IoError;

fn small_config() -> SynthConfig {
    SynthConfig { intrinsics: CameraIntrinsics::new(90.0, 90.0, 31.5, 31.5, 64, 64).unwrap(), ..SynthConfig::default() }
}

fn bytes(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap()
}

#[test]
fn shipped_default_config_matches_the_built_in_one() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default_benchmark.json");
    let shipped: SynthConfig = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(shipped, SynthConfig::default());
}

#[test]
fn normal_map_pfm_round_trips_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let views = generate(&small_config()).unwrap();
    let image = PfmImage::from_vectors(views[2].maps.normals());
    let path = dir.path().join("n.pfm");
    write_pfm(&path, &image).unwrap();
    let back = read_pfm(&path).unwrap();
    assert_eq!(back.channels, 3);
    let bits = |d: &[f32]| d.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back.data), bits(&image.data));
    write_pfm(&dir.path().join("again.pfm"), &back).unwrap();
    assert_eq!(bytes(&path), bytes(&dir.path().join("again.pfm")));
}

#[test]
fn truncated_pfm_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.pfm");
    write_pfm(&path, &PfmImage::from_scalar(&Raster::filled(4, 3, 2.5))).unwrap();
    let mut data = bytes(&path);
    data.truncate(data.len() - 5);
    fs::write(&path, data).unwrap();
    assert!(matches!(read_pfm(&path), Err(IoError::TruncatedData { expected: 48, actual: 43 })));
    assert!(matches!(read_pfm(&dir.path().join("missing.pfm")), Err(IoError::Io { .. })));
}

#[test]
fn ply_and_cameras_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let pts = vec![Vector3::new(0.1, 0.2, 0.3), Vector3::new(-4.0, 1e-9, 7.25)];
    let path = dir.path().join("p.ply");
    write_ply_points(&path, &pts, None).unwrap();
    let cloud = read_ply_points(&path).unwrap();
    assert_eq!(cloud.points, pts);
    assert_eq!(cloud.quality, None);

    let config = small_config();
    let cams: Vec<(CameraIntrinsics, CameraPose)> =
        config.poses().unwrap().into_iter().map(|p| (config.intrinsics, p)).collect();
    let path = dir.path().join("cameras.json");
    write_cameras(&path, &cams).unwrap();
    assert_eq!(read_cameras(&path).unwrap(), cams);
}

#[test]
fn results_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let row = ResultRow {
        experiment_id: "a".into(),
        noise_sigma_deg: 4.0,
        patch_model: "fronto".into(),
        loss: "reparam".into(),
        mu: None,
        seed: 9,
        mean_depth_err: Some(1.0 / 3.0),
        median: Some(0.25),
        std: Some(1e-300),
        valid_frac: Some(1.0),
        runtime_ms: None,
        error: String::new(),
    };
    let path = dir.path().join("r.csv");
    write_results(&path, std::slice::from_ref(&row)).unwrap();
    assert_eq!(read_results(&path).unwrap(), vec![row]);
    write_results(&path, &[]).unwrap();
    assert!(read_results(&path).unwrap().is_empty());
}

#[test]
fn benchmark_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    let views = generate(&config).unwrap();
    let manifest = write_benchmark(dir.path(), &config, [3.0, 5.0], &views).unwrap();
    let bench = read_benchmark(dir.path()).unwrap();
    assert_eq!(bench.manifest, manifest);
    assert_eq!(bench.manifest.config, config);
    assert!(bench.has_normals());
    for (a, b) in views.iter().zip(&bench.views) {
        assert_eq!(a.pose, b.pose);
        assert_eq!(a.intrinsics, b.intrinsics);
        assert_eq!(a.maps.mask(), b.maps.mask());
        let mask = a.maps.mask().data();
        for (i, m) in mask.iter().enumerate() {
            if !*m {
                continue;
            }
            assert!((a.maps.normals().data()[i] - b.maps.normals().data()[i]).amax() < 1e-6);
            assert!((b.maps.normals().data()[i].norm() - 1.0).abs() < 1e-12);
            let (ra, rb) = (&a.maps.reflectance().data()[i], &b.maps.reflectance().data()[i]);
            assert!(ra.as_slice().iter().zip(rb.as_slice()).all(|(x, y)| (x - y).abs() < 1e-6));
            let (za, zb) = (a.maps.gt_depth().unwrap().data()[i], b.maps.gt_depth().unwrap().data()[i]);
            assert!((za - zb).abs() < 1e-6 * za);
        }
    }
}

#[test]
fn benchmark_writer_is_deterministic() {
    let config = small_config();
    let views = generate(&config).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_benchmark(a.path(), &config, [3.0, 5.0], &views).unwrap();
    write_benchmark(b.path(), &config, [3.0, 5.0], &views).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 5 * 4 + 2);
    for name in names {
        assert_eq!(bytes(&a.path().join(&name)), bytes(&b.path().join(&name)), "{name:?}");
    }
}

#[test]
fn manifest_version_and_missing_normals() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    let views = generate(&config).unwrap();
    let mut manifest = write_benchmark(dir.path(), &config, [3.0, 5.0], &views).unwrap();
    let path = dir.path().join(MANIFEST_FILE);

    for f in &mut manifest.files {
        f.normals = None;
    }
    write_manifest(&path, &manifest).unwrap();
    let bench = read_benchmark(dir.path()).unwrap();
    assert!(!bench.has_normals());
    let first = bench.views[0].maps.normals().data()[0];
    assert!(bench.views.iter().all(|v| v.maps.normals().data().iter().all(|n| *n == first)));

    manifest.version = "radiant-benchmark/0".into();
    write_manifest(&path, &manifest).unwrap();
    assert!(matches!(read_manifest(&path), Err(IoError::UnsupportedVersion(_))));
}

#[test]
fn shipped_plans_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["patch_models_plan.json", "mu_envelope_plan.json"] {
        let text = fs::read_to_string(dir.join(name)).unwrap();
        let plan: radiant_sweep::experiment::ExperimentPlan = serde_json::from_str(&text).unwrap();
        plan.validate().unwrap();
        assert_eq!(plan.config, SynthConfig::default(), "{name}");
    }
}
