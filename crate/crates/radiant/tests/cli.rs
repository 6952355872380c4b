use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use radiant_core::geometry::CameraIntrinsics;
use radiant_core::sweep::PatchModel;
use radiant_core::synth::SynthConfig;
use radiant_sweep::cli::{main_with_args, ExitStatus, ReconstructSummary};
use radiant_sweep::experiment::ExperimentPlan;
use radiant_sweep::io::benchmark::{read_manifest, write_manifest, MANIFEST_FILE};
use radiant_sweep::io::results::read_results;

fn small_config() -> SynthConfig {
    SynthConfig { intrinsics: CameraIntrinsics::new(90.0, 90.0, 31.5, 31.5, 64, 64).unwrap(), ..SynthConfig::default() }
}

fn run(args: &[&str]) -> ExitStatus {
    main_with_args(std::iter::once("radiant-sweep").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_json(path: &Path, value: &impl serde::Serialize) {
    fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

/// Small benchmark in `dir/bench`.
fn small_benchmark(dir: &Path) -> PathBuf {
    let config = dir.join("config.json");
    write_json(&config, &small_config());
    let bench = dir.join("bench");
    assert_eq!(run(&["synth", "--config", s(&config), "--out", s(&bench)]), ExitStatus::Success);
    bench
}

#[test]
fn synth_writes_four_maps_per_view() {
    let dir = tempfile::tempdir().unwrap();
    let bench = small_benchmark(dir.path());
    let count = |prefix: &str| {
        fs::read_dir(&bench)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_str().unwrap().starts_with(prefix))
            .count()
    };
    for prefix in ["normals_", "reflectance_", "mask_", "gt_depth_"] {
        assert_eq!(count(prefix), 5, "{prefix}");
    }
    assert!(bench.join("benchmark.json").exists() && bench.join("cameras.json").exists());
}

#[test]
fn synth_rejects_a_single_camera() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config();
    config.cameras.count = 1;
    let path = dir.path().join("c.json");
    write_json(&path, &config);
    assert_eq!(run(&["synth", "--config", s(&path), "--out", s(&dir.path().join("o"))]), ExitStatus::Usage);
    fs::write(&path, "{ not json").unwrap();
    assert_eq!(run(&["synth", "--config", s(&path), "--out", s(&dir.path().join("o"))]), ExitStatus::Usage);
}

#[test]
fn synth_accepts_calibration_files() {
    let dir = tempfile::tempdir().unwrap();
    let bench = small_benchmark(dir.path());
    let cams = bench.join("cameras.json");
    let config = dir.path().join("config.json");
    let again = dir.path().join("again");
    assert_eq!(run(&["synth", "--config", s(&config), "--cameras", s(&cams), "--out", s(&again)]), ExitStatus::Success);
    for i in 0..5 {
        let name = format!("normals_{i:02}.pfm");
        assert_eq!(fs::read(bench.join(&name)).unwrap(), fs::read(again.join(&name)).unwrap());
    }
}

#[test]
fn reconstruct_writes_artifacts_and_evaluate_scores_them() {
    let dir = tempfile::tempdir().unwrap();
    let bench = small_benchmark(dir.path());
    let out = dir.path().join("rec");
    let status =
        run(&["reconstruct", "--benchmark", s(&bench), "--out", s(&out), "--model", "surface", "--stride", "4"]);
    assert_eq!(status, ExitStatus::Success);
    for name in ["depth.pfm", "cost.pfm", "valid.pfm", "points.ply", "summary.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let summary: ReconstructSummary =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.valid_frac >= 0.5);
    let err = summary.depth_error.unwrap();
    assert!(err.mean < 1e-3 * summary.mean_gt_depth.unwrap(), "{err:?}");

    let report = dir.path().join("eval.json");
    let status = run(&["evaluate", "--benchmark", s(&bench), "--result", s(&out), "--out", s(&report)]);
    assert_eq!(status, ExitStatus::Success);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert!(report["chamfer"]["mean"].as_f64().unwrap() < 1e-3);
}

#[test]
fn reconstruct_flag_validation() {
    let dir = tempfile::tempdir().unwrap();
    let bench = small_benchmark(dir.path());
    let out = dir.path().join("rec");
    let base = ["reconstruct", "--benchmark", s(&bench), "--out", s(&out)];
    let with = |extra: &[&str]| run(&[&base[..], extra].concat());
    assert_eq!(with(&["--loss", "combined"]), ExitStatus::Usage);
    assert_eq!(with(&["--mu", "1"]), ExitStatus::Usage);
    assert_eq!(with(&["--model", "planar"]), ExitStatus::Usage);
    assert_eq!(with(&["--reference", "9"]), ExitStatus::Usage);
    assert_eq!(with(&["--zrange", "5,3"]), ExitStatus::Usage);
    assert_eq!(with(&["--stride", "0"]), ExitStatus::Usage);
    assert_eq!(with(&["--threads", "0"]), ExitStatus::Usage);
    let missing = dir.path().join("nowhere");
    assert_eq!(run(&["reconstruct", "--benchmark", s(&missing), "--out", s(&out)]), ExitStatus::Io);
}

#[test]
fn normal_models_need_normal_maps() {
    let dir = tempfile::tempdir().unwrap();
    let bench = small_benchmark(dir.path());
    let path = bench.join(MANIFEST_FILE);
    let mut manifest = read_manifest(&path).unwrap();
    for f in &mut manifest.files {
        f.normals = None;
    }
    write_manifest(&path, &manifest).unwrap();
    let out = dir.path().join("rec");
    let base = ["reconstruct", "--benchmark", s(&bench), "--out", s(&out), "--stride", "8"];
    let with = |extra: &[&str]| run(&[&base[..], extra].concat());
    assert_eq!(with(&["--model", "slanted"]), ExitStatus::Usage);
    assert_eq!(with(&["--model", "surface"]), ExitStatus::Usage);
    assert_eq!(with(&["--model", "fronto", "--loss", "combined", "--mu", "1"]), ExitStatus::Usage);
    assert_eq!(with(&["--model", "fronto"]), ExitStatus::Success);
}

#[test]
fn degraded_reconstruction_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let bench = small_benchmark(dir.path());
    let out = dir.path().join("rec");
    // Points just in front of the reference camera fall outside every control view.
    let status = run(&[
        "reconstruct",
        "--benchmark",
        s(&bench),
        "--out",
        s(&out),
        "--stride",
        "8",
        "--model",
        "fronto",
        "--zrange",
        "0.01,0.02",
    ]);
    assert_eq!(status, ExitStatus::Degraded);
    assert!(out.join("summary.json").exists());
}

#[test]
fn noise_sweep_rows_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = ExperimentPlan::new(vec![0.0, 2.0], vec![PatchModel::FrontoParallel, PatchModel::Surface], vec![1]);
    plan.config = small_config();
    plan.mu_grid = vec![0.1];
    plan.pixel_stride = 8;
    let path = dir.path().join("plan.json");
    write_json(&path, &plan);
    let out = dir.path().join("sweep");
    assert_eq!(run(&["noise-sweep", s(&path), "--out", s(&out)]), ExitStatus::Success);
    let rows = read_results(&out.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    assert!(rows.iter().all(|r| r.error.is_empty() && r.runtime_ms.is_none()));
    assert_eq!(rows[0].experiment_id, "sigma0_fronto_reparam_seed1");
    assert_eq!(rows[1].mu, Some(0.1));

    plan.noise_sigmas_deg.clear();
    write_json(&path, &plan);
    assert_eq!(run(&["noise-sweep", s(&path), "--out", s(&out)]), ExitStatus::Usage);
}

#[test]
fn noise_sweep_records_failures_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = ExperimentPlan::new(vec![0.0], vec![PatchModel::FrontoParallel], vec![1]);
    plan.config = small_config();
    plan.pixel_stride = 8;
    plan.z_range = Some([0.01, 0.02]);
    let path = dir.path().join("plan.json");
    write_json(&path, &plan);
    let out = dir.path().join("sweep");
    assert_eq!(run(&["noise-sweep", s(&path), "--out", s(&out), "--timing"]), ExitStatus::Success);
    let rows = read_results(&out.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(!rows[0].error.is_empty());
    assert_eq!(rows[0].mean_depth_err, None);
    assert!(rows[0].runtime_ms.is_some());
}

#[test]
fn reparam_check_exit_codes() {
    assert_eq!(run(&["reparam-check", "--trials", "200", "--seed", "3"]), ExitStatus::Success);
    assert_eq!(run(&["reparam-check", "--trials", "0"]), ExitStatus::Usage);
    assert_eq!(run(&["reparam-check", "--trials", "4", "--inject-singular"]), ExitStatus::PropertyFailure);
}

#[test]
fn binary_honours_the_thread_variable_and_names_the_failed_property() {
    let bin = env!("CARGO_BIN_EXE_radiant-sweep");
    let out = Command::new(bin)
        .args(["reparam-check", "--trials", "4", "--inject-singular"])
        .env("RADIANT_SWEEP_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("round-trip"));
    let out =
        Command::new(bin).args(["reparam-check", "--trials", "1"]).env("RADIANT_SWEEP_THREADS", "0").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(bin).arg("bogus").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
