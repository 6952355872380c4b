//! Acceptance criteria 1 to 10. Runs as a plain binary so that every
//! criterion prints its verdict line; exits non-zero if any criterion fails.
//!
//! Filter with `cargo test --test acceptance -- <substring>`.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use radiant_core::geometry::{CameraIntrinsics, Pixel};
use radiant_core::integration::{integrate_patch, Patch};
use radiant_core::metrics::{chamfer_distance, condition_number, mean_depth_error, normal_mae};
use radiant_core::reparam::{
    canonical_triplet, embed_reflectance, optimal_triplet, render_pbr, EmbeddedReflectance, NormOrder,
};
use radiant_core::sweep::{DepthSweeper, PatchModel, SweepConfig};
use radiant_core::synth::{add_normal_noise, generate, NoiseSpec, SynthConfig};
use radiant_core::{Matrix3, Raster, ReflectanceVec, Vector3, ViewMaps};
use radiant_sweep::experiment::{run_plan, ExperimentPlan};
use radiant_sweep::io::results::ResultRow;
use radiant_sweep::parallel::{reconstruct, thread_pool};
use radiant_sweep::reparam_check::{self, CheckOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

const SEEDS: [u64; 3] = [1, 2, 3];
/// Sub-sampling of the 256² benchmark for the noise experiments.
const EXPERIMENT_STRIDE: usize = 9;

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn bijectivity() -> Verdict {
    let start = Instant::now();
    let report = reparam_check::run(&CheckOptions { trials: 10_000, seed: 2024, inject_singular: false });
    let elapsed = start.elapsed();
    let round_trip = &report[0];
    verdict(
        round_trip.passed() && elapsed < Duration::from_secs(5),
        format!(
            "worst componentwise error {:.2e} (q=1 and q=3) in {:.2} s",
            round_trip.max_residual,
            elapsed.as_secs_f64()
        ),
    )
}

fn optimal_triplet_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut gram, mut cond, mut dot) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..1000 {
        let n = random_unit(&mut rng);
        let intensity = [1.0, 0.5, 2.5][k % 3];
        let l = optimal_triplet(&n, intensity);
        let m = l.matrix();
        gram = gram.max((m * m.transpose() - Matrix3::identity() * intensity * intensity).amax());
        cond = cond.max((condition_number(&l) - 1.0).abs());
        for row in 0..3 {
            dot = dot.max((m.row(row).transpose().dot(&n) - intensity / 3f64.sqrt()).abs());
        }
    }
    verdict(
        gram <= 1e-10 && cond <= 1e-9 && dot <= 1e-10,
        format!("max |LLᵀ − I²| {gram:.1e}, |cond − 1| {cond:.1e}, |l·n − I/√3| {dot:.1e}"),
    )
}

fn identity_light_reduction() -> Verdict {
    let mut normals = vec![
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(0.6, 0.8, 0.0),
        Vector3::new(0.0, -0.6, 0.8),
        Vector3::new(0.36, 0.48, -0.8),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    normals.extend((0..1000).map(|_| random_unit(&mut rng)));
    let lights = canonical_triplet();
    let mismatches = normals
        .iter()
        .filter(|n| {
            let v = render_pbr(&ReflectanceVec::gray(1.0), n, &lights).unwrap();
            let bits = |u: &Vector3<f64>| u.map(f64::to_bits);
            bits(&v.columns()[0]) != bits(n)
        })
        .count();
    verdict(mismatches == 0, format!("{mismatches} of {} normals differ bitwise", normals.len()))
}

fn embedding_norm() -> Verdict {
    let levels = |k: usize, n: usize| k as f64 / (n - 1) as f64;
    let gray: Vec<ReflectanceVec> = (0..100).map(|k| ReflectanceVec::gray(levels(k, 100))).collect();
    let rgb: Vec<ReflectanceVec> =
        (0..100).map(|k| ReflectanceVec::rgb([levels(k % 5, 5), levels(k / 5 % 5, 5), levels(k / 25, 4)])).collect();
    let mut worst = 0.0f64;
    let mut unit_ok = true;
    for order in [NormOrder::L1, NormOrder::L2] {
        for grid in [&gray, &rgb] {
            let q = grid[0].channels();
            let expected = EmbeddedReflectance::expected_norm(q, order);
            let closed_form = (q as f64).powf(1.0 / order.exponent() - 1.0);
            unit_ok &= (order == NormOrder::L1 || q == 1) == (expected == 1.0) && expected == closed_form;
            for r in grid {
                let e = embed_reflectance(r, order).unwrap();
                worst = worst.max((e.norm() - expected).abs());
            }
        }
    }
    verdict(worst <= 1e-12 && unit_ok, format!("worst |‖e‖ − q^(1/p−1)| {worst:.1e} over 4 × 100 inputs"))
}

fn noiseless_exactness() -> Verdict {
    let config = SynthConfig::default();
    let views = generate(&config).unwrap();
    let (z0, z1) = config.depth_range();
    let sweeper = DepthSweeper::new(&views, 0, SweepConfig::new(z0, z1, PatchModel::Surface)).unwrap();
    let pool = thread_pool(Some(1)).unwrap();
    let start = Instant::now();
    let result = reconstruct(&sweeper, &pool, None);
    let elapsed = start.elapsed();
    let maps = &views[0].maps;
    let gt = maps.gt_depth().unwrap();
    let summary = mean_depth_error(&result, gt, maps.mask()).unwrap();
    let mean_gt = gt.data().iter().zip(maps.mask().data()).filter(|(_, m)| **m).map(|(z, _)| *z).sum::<f64>()
        / maps.valid_count() as f64;
    let relative = summary.mean / mean_gt;
    verdict(
        relative < 1e-4 && elapsed < Duration::from_secs(300),
        format!(
            "mean depth error {:.2e} = {relative:.2e} × mean GT depth over {} px ({} invalid), {:.0} s on 1 thread",
            summary.mean,
            summary.count,
            summary.excluded,
            elapsed.as_secs_f64()
        ),
    )
}

/// (σ bits, model, loss, μ bits or the bits of −1 for the re-parametrized loss)
type RunKey = (u64, String, String, u64);

/// Seed-averaged mean depth error per run configuration.
fn averaged(rows: &[ResultRow]) -> Result<BTreeMap<RunKey, f64>, String> {
    let mut sums: BTreeMap<RunKey, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let err = r.mean_depth_err.ok_or_else(|| format!("{}: {}", r.experiment_id, r.error))?;
        let key = (r.noise_sigma_deg.to_bits(), r.patch_model.clone(), r.loss.clone(), r.mu.unwrap_or(-1.0).to_bits());
        let e = sums.entry(key).or_default();
        e.0 += err;
        e.1 += 1;
    }
    Ok(sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
}

fn experiment_plan(sigmas: &[f64], models: &[PatchModel], seeds: &[u64]) -> ExperimentPlan {
    ExperimentPlan {
        pixel_stride: EXPERIMENT_STRIDE,
        ..ExperimentPlan::new(sigmas.to_vec(), models.to_vec(), seeds.to_vec())
    }
}

fn patch_model_ordering() -> Verdict {
    let pool = thread_pool(None).unwrap();
    let clean = run_plan(&experiment_plan(&[0.0], &PatchModel::ALL, &[SEEDS[0]]), &pool, false).unwrap();
    let noisy = run_plan(&experiment_plan(&[2.0, 4.0, 8.0], &PatchModel::ALL, &SEEDS), &pool, false).unwrap();
    let table = match (averaged(&clean), averaged(&noisy)) {
        (Ok(mut a), Ok(b)) => {
            a.extend(b);
            a
        }
        (Err(e), _) | (_, Err(e)) => return verdict(false, e),
    };
    let err = |sigma: f64, model: PatchModel| {
        table[&(sigma.to_bits(), model.name().to_owned(), "reparam".to_owned(), (-1.0f64).to_bits())]
    };
    let [fronto, slanted, surface] = PatchModel::ALL.map(|m| err(0.0, m));
    let ordered = surface * 2.0 <= slanted && slanted * 2.0 <= fronto;
    let mut monotone = true;
    let mut curves = Vec::new();
    for model in PatchModel::ALL {
        let curve: Vec<f64> = [2.0, 4.0, 8.0].map(|s| err(s, model)).to_vec();
        monotone &= curve.windows(2).all(|w| w[0] <= w[1]);
        curves.push(format!("{} {:.2e}/{:.2e}/{:.2e}", model.name(), curve[0], curve[1], curve[2]));
    }
    verdict(
        ordered && monotone,
        format!(
            "σ=0: surface {surface:.2e} < slanted {slanted:.2e} < fronto {fronto:.2e} (ratios {:.1}, {:.1}); σ=2/4/8: {}",
            slanted / surface,
            fronto / slanted,
            curves.join(", ")
        ),
    )
}

fn hyperparameter_free_envelope() -> Verdict {
    let pool = thread_pool(None).unwrap();
    let sigmas = [0.0, 2.0, 4.0, 8.0];
    let plan = ExperimentPlan {
        reflectance_noise_frac: 0.01,
        mu_grid: vec![1e-2, 1e-1, 1.0, 1e1, 1e2],
        ..experiment_plan(&sigmas, &[PatchModel::Slanted], &SEEDS)
    };
    let table = match averaged(&run_plan(&plan, &pool, false).unwrap()) {
        Ok(t) => t,
        Err(e) => return verdict(false, e),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for sigma in sigmas {
        let at = |loss: &str, mu: f64| table[&(sigma.to_bits(), "slanted".to_owned(), loss.to_owned(), mu.to_bits())];
        let reparam = at("reparam", -1.0);
        let mut combined: Vec<f64> = plan.mu_grid.iter().map(|&mu| at("combined", mu)).collect();
        combined.sort_by(f64::total_cmp);
        let median = combined[combined.len() / 2];
        let ok = reparam <= median;
        pass &= ok;
        parts.push(format!(
            "σ={sigma}: reparam {reparam:.2e} vs median {median:.2e} [{:.2e}..{:.2e}]{}",
            combined[0],
            combined[combined.len() - 1],
            if ok { "" } else { " ✗" }
        ));
    }
    verdict(pass, parts.join("; "))
}

fn intrinsics(f: f64, size: usize) -> CameraIntrinsics {
    let c = (size as f64 - 1.0) / 2.0;
    CameraIntrinsics::new(f, f, c, c, size, size).unwrap()
}

fn square_patch(center: (usize, usize), radius: usize, mut normal_at: impl FnMut(Pixel) -> Vector3<f64>) -> Patch {
    Patch::gather(center, radius, usize::MAX, usize::MAX, |x, y| Some(normal_at(Pixel::new(x as f64, y as f64))))
        .unwrap()
}

fn integration_oracles() -> Verdict {
    // Plane n·X = c: depth c / (n·d).
    let intr = intrinsics(100.0, 64);
    let mut plane_err = 0.0f64;
    for normal in [Vector3::new(0.0, 0.0, -1.0), Vector3::new(0.4, 0.1, -1.0), Vector3::new(-0.2, 0.7, -1.0)] {
        let n = normal.normalize();
        let c = n.dot(&Vector3::new(0.0, 0.0, 2.0));
        let depth = |p: Pixel| c / n.dot(&intr.ray(p));
        let center = (30, 33);
        let patch = square_patch(center, 5, |_| n);
        let alphas = integrate_patch(&intr, &patch).unwrap().scales;
        let zc = depth(patch.pixel(patch.pixels().iter().position(|p| *p == center).unwrap()));
        for j in 0..patch.len() {
            plane_err = plane_err.max((alphas.alphas()[j] - depth(patch.pixel(j)) / zc).abs());
        }
    }

    // Sphere |X − C| = R, front intersection along each pixel ray.
    let intr = intrinsics(100.0, 101);
    let (center, radius) = (Vector3::new(0.1, -0.05, 8.0), 3.0);
    let hit = |d: Vector3<f64>| {
        let (a, b, c) = (d.norm_squared(), d.dot(&center), center.norm_squared() - radius * radius);
        d * ((b - (b * b - a * c).sqrt()) / a)
    };
    let mut sphere_err = 0.0f64;
    for c in [(50, 50), (44, 57)] {
        let patch = square_patch(c, 5, |p| (hit(intr.ray(p)) - center).normalize());
        let alphas = integrate_patch(&intr, &patch).unwrap().scales;
        let zc = hit(intr.ray(Pixel::new(c.0 as f64, c.1 as f64))).z;
        for j in 0..patch.len() {
            sphere_err = sphere_err.max((alphas.alphas()[j] - hit(intr.ray(patch.pixel(j))).z / zc).abs());
        }
    }
    verdict(
        plane_err <= 1e-6 && sphere_err < 1e-4,
        format!("plane α error {plane_err:.1e}, 11×11 sphere-cap α error {sphere_err:.1e}"),
    )
}

fn metrics_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut cloud = |n: usize| -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.2..0.2))
            })
            .collect()
    };
    let (a, b) = (cloud(1000), cloud(1000));
    let directed = |p: &[Vector3<f64>], q: &[Vector3<f64>]| {
        p.iter().map(|x| q.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min)).sum::<f64>() / p.len() as f64
    };
    let brute = 0.5 * (directed(&a, &b) + directed(&b, &a));
    let fast = chamfer_distance(&a, &b).unwrap().mean;
    let chamfer_err = (fast - brute).abs();

    let side = 1000;
    let gt = Raster::from_fn(side, side, |x, y| {
        Vector3::new((x as f64 / 999.0 - 0.5) * 0.6, (y as f64 / 999.0 - 0.5) * 0.6, -1.0).normalize()
    });
    let mask = Raster::filled(side, side, true);
    let maps =
        ViewMaps::new(gt.clone(), Raster::filled(side, side, ReflectanceVec::gray(0.5)), mask.clone(), None).unwrap();
    let sigma = 4.0;
    let noisy =
        add_normal_noise(&maps, &NoiseSpec { normal_sigma_deg: sigma, reflectance_sigma_frac: 0.0, seed: 11 }, 0);
    let mae = normal_mae(noisy.normals(), &gt, &mask).unwrap().mean;
    let expected = sigma * (2.0 / std::f64::consts::PI).sqrt();
    let rel = (mae - expected).abs() / expected;
    verdict(
        chamfer_err <= 1e-12 && rel < 0.05,
        format!("|grid − brute| Chamfer {chamfer_err:.1e}; MAE {mae:.4}° vs σ√(2/π) {expected:.4}° ({:.2}% off, 10⁶ samples)", rel * 100.0),
    )
}

fn directory_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_radiant-sweep");
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let config = SynthConfig {
        noise: NoiseSpec { normal_sigma_deg: 2.0, reflectance_sigma_frac: 0.01, seed: 0 },
        ..SynthConfig::default()
    };
    fs::write(root.join("config.json"), serde_json::to_string(&config).unwrap()).unwrap();
    let plan = ExperimentPlan {
        config: SynthConfig {
            intrinsics: CameraIntrinsics::new(90.0, 90.0, 31.5, 31.5, 64, 64).unwrap(),
            ..SynthConfig::default()
        },
        reflectance_noise_frac: 0.01,
        mu_grid: vec![0.1, 10.0],
        pixel_stride: 3,
        ..ExperimentPlan::new(vec![0.0, 4.0], PatchModel::ALL.to_vec(), vec![5, 6])
    };
    fs::write(root.join("plan.json"), serde_json::to_string(&plan).unwrap()).unwrap();

    let run = |args: &[&str], threads: &str| {
        let status = Command::new(bin).args(args).args(["--threads", threads]).status().unwrap();
        assert!(status.success(), "{args:?} exited with {status}");
    };
    let mut synth = Vec::new();
    let mut sweep = Vec::new();
    for (k, threads) in ["1", "1", "8"].into_iter().enumerate() {
        let out = root.join(format!("synth{k}"));
        let config = root.join("config.json");
        run(&["synth", "--config", config.to_str().unwrap(), "--seed", "42", "--out", out.to_str().unwrap()], threads);
        synth.push(directory_bytes(&out));
        let out = root.join(format!("sweep{k}"));
        run(&["noise-sweep", root.join("plan.json").to_str().unwrap(), "--out", out.to_str().unwrap()], threads);
        sweep.push(fs::read(out.join("results.csv")).unwrap());
    }
    let synth_same = synth.windows(2).all(|w| w[0] == w[1]);
    let sweep_same = sweep.windows(2).all(|w| w[0] == w[1]);
    let rows = sweep[0].iter().filter(|b| **b == b'\n').count() - 1;
    verdict(
        synth_same && sweep_same && rows == 2 * 3 * 3 * 2,
        format!(
            "synth: {} files {}; noise-sweep: {rows} rows {} (runs 1, 2 on 1 thread, run 3 on 8)",
            synth[0].len(),
            if synth_same { "identical" } else { "DIFFER" },
            if sweep_same { "identical" } else { "DIFFER" }
        ),
    )
}

type Criterion = (u8, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 10] = [
    (1, "bijectivity", bijectivity),
    (2, "optimal-triplet", optimal_triplet_properties),
    (3, "identity-light-reduction", identity_light_reduction),
    (4, "embedding-norm", embedding_norm),
    (5, "noiseless-exactness", noiseless_exactness),
    (6, "patch-model-ordering", patch_model_ordering),
    (7, "hyperparameter-free-envelope", hyperparameter_free_envelope),
    (8, "integration-oracles", integration_oracles),
    (9, "metrics-oracles", metrics_oracles),
    (10, "determinism", determinism),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        for (n, name, _) in CRITERIA {
            println!("criterion-{n}-{name}: test");
        }
        return;
    }
    let selected: Vec<&Criterion> = CRITERIA
        .iter()
        .filter(|(n, name, _)| {
            filters.is_empty() || filters.iter().any(|f| format!("criterion-{n}-{name}").contains(f.as_str()))
        })
        .collect();
    let mut failed = Vec::new();
    for (n, name, check) in selected.iter().copied() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {name:<29} {status}  ({:.1} s) {}", start.elapsed().as_secs_f64(), outcome.detail);
        if !outcome.pass {
            failed.push(*n);
        }
    }
    println!("acceptance: {} passed, {} failed {failed:?}", selected.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
