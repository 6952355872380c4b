//! Command-line interface. Every command writes data files only; exit codes
//! follow [`ExitStatus`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use radiant_core::geometry::backproject_fronto;
use radiant_core::metrics::{chamfer_distance, mean_depth_error, ErrorSummary};
use radiant_core::raster::Raster;
use radiant_core::sweep::{DepthResult, DepthSweeper, Loss, PatchModel, SweepConfig};
use radiant_core::synth::{apply_noise, render_view, SynthConfig};
use radiant_core::{Pixel, Vector3, View};
use serde::{Deserialize, Serialize};

use crate::experiment::{run_plan, ExperimentPlan};
use crate::io::benchmark::{read_benchmark, write_benchmark};
use crate::io::cameras::read_cameras;
use crate::io::pfm::{read_pfm, write_pfm, PfmImage};
use crate::io::ply::{read_ply_points, write_ply_points};
use crate::io::results::write_results;
use crate::io::IoError;
use crate::parallel::{reconstruct, stride_mask, thread_pool};
use crate::reparam_check::{self, CheckOptions};

pub const THREADS_ENV: &str = "RADIANT_SWEEP_THREADS";

/// Reconstructions with fewer valid pixels than this fraction exit with
/// [`ExitStatus::Degraded`].
pub const DEGRADED_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    PropertyFailure = 1,
    Usage = 2,
    Io = 3,
    Degraded = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { status: ExitStatus::Usage, message: message.into() }
    }

    pub fn property(message: impl Into<String>) -> Self {
        Self { status: ExitStatus::PropertyFailure, message: message.into() }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self { status: ExitStatus::Io, message: e.to_string() }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError { status: ExitStatus::Io, message: format!("{}: {e}", path.display()) }
}

#[derive(Debug, Parser)]
#[command(name = "radiant-sweep", version, about = "Depth from multi-view normal and reflectance maps")]
pub struct Cli {
    /// Worker threads for reconstruction (default: one per core).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic benchmark directory.
    Synth(SynthArgs),
    /// Reconstruct the depth map of one benchmark view.
    Reconstruct(ReconstructArgs),
    /// Score a reconstruction against the benchmark ground truth.
    Evaluate(EvaluateArgs),
    /// Run a noise-robustness experiment plan and write results.csv.
    NoiseSweep(NoiseSweepArgs),
    /// Check the re-parametrization properties on seeded random cases.
    ReparamCheck(ReparamCheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generation config JSON (default: the built-in benchmark).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Calibration JSON replacing the turntable cameras.
    #[arg(long)]
    pub cameras: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Fronto,
    Slanted,
    Surface,
}

impl From<ModelArg> for PatchModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Fronto => PatchModel::FrontoParallel,
            ModelArg::Slanted => PatchModel::Slanted,
            ModelArg::Surface => PatchModel::Surface,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Reparam,
    Combined,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub benchmark: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "surface")]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "reparam")]
    pub loss: LossArg,
    /// Photometric weight of the combined loss (required with it).
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, default_value_t = SweepConfig::DEFAULT_PATCH_RADIUS)]
    pub patch_radius: usize,
    /// Depth bracket `z_min,z_max` (default: from the benchmark manifest).
    #[arg(long, value_delimiter = ',')]
    pub zrange: Option<Vec<f64>>,
    #[arg(long, default_value_t = SweepConfig::DEFAULT_COARSE_SAMPLES)]
    pub coarse_samples: usize,
    #[arg(long, default_value_t = SweepConfig::DEFAULT_REFINE_TOL)]
    pub refine_tol: f64,
    /// Reconstruct every n-th pixel in each direction.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = 0)]
    pub reference: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub benchmark: PathBuf,
    /// Output directory of `reconstruct`.
    #[arg(long)]
    pub result: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseSweepArgs {
    pub plan: PathBuf,
    /// Output directory (default: the plan's output_dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fill the runtime_ms column; the table is then no longer reproducible.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct ReparamCheckArgs {
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub inject_singular: bool,
}

/// Parses `args` (program name first) and runs the command. Diagnostics go
/// to stderr, reports to stdout.
pub fn main_with_args<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::Usage } else { ExitStatus::Success };
        }
    };
    match run(&cli) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.status
        }
    }
}

pub fn run(cli: &Cli) -> Result<ExitStatus, CliError> {
    if cli.threads == Some(0) {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Reconstruct(a) => cmd_reconstruct(a, cli.threads),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::NoiseSweep(a) => cmd_noise_sweep(a, cli.threads),
        Command::ReparamCheck(a) => cmd_reparam_check(a),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_error(path))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(io_error(path))
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    thread_pool(threads).map_err(|e| CliError::usage(format!("thread pool: {e}")))
}

pub fn cmd_synth(args: &SynthArgs) -> Result<ExitStatus, CliError> {
    let mut config: SynthConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.noise.seed = seed;
    }
    let config_error = |e: radiant_core::Error| CliError::usage(format!("config: {e}"));
    let cameras = match &args.cameras {
        Some(path) => {
            config.surface.validate().map_err(config_error)?;
            config.reflectance.validate().map_err(config_error)?;
            config.noise.validate().map_err(config_error)?;
            read_cameras(path)?
        }
        None => {
            config.validate().map_err(config_error)?;
            config.poses().map_err(config_error)?.into_iter().map(|p| (config.intrinsics, p)).collect()
        }
    };
    if cameras.len() < 2 {
        return Err(CliError::usage(format!("at least 2 views are required, got {}", cameras.len())));
    }
    let views: Vec<View> = cameras
        .iter()
        .enumerate()
        .map(|(i, (intr, pose))| View {
            maps: apply_noise(&render_view(&config.surface, &config.reflectance, pose, intr), &config.noise, i as u64),
            pose: *pose,
            intrinsics: *intr,
        })
        .collect();
    let z_range = match &args.cameras {
        None => config.depth_range(),
        Some(_) => {
            let target = config.surface.centroid();
            let margin = 3.0 * config.surface.height_span();
            let distances = cameras.iter().map(|(_, p)| (p.center() - target).norm());
            let (near, far) = distances.fold((f64::INFINITY, 0.0f64), |(a, b), d| (a.min(d), b.max(d)));
            ((near - margin).max(1e-3), far + margin)
        }
    };
    create_dir(&args.out)?;
    write_benchmark(&args.out, &config, [z_range.0, z_range.1], &views)?;
    Ok(ExitStatus::Success)
}

/// `summary.json` written by `reconstruct`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructSummary {
    pub reference: usize,
    pub patch_model: PatchModel,
    pub loss: Loss,
    pub z_range: [f64; 2],
    pub patch_radius: usize,
    pub stride: usize,
    /// Masked-in reference pixels that were swept.
    pub evaluated: usize,
    pub valid: usize,
    pub valid_frac: f64,
    /// Absent when the benchmark has no ground-truth depth.
    pub depth_error: Option<ErrorSummary>,
    pub mean_gt_depth: Option<f64>,
    pub runtime_ms: f64,
}

fn loss_from_args(args: &ReconstructArgs) -> Result<Loss, CliError> {
    match (args.loss, args.mu) {
        (LossArg::Reparam, None) => Ok(Loss::Reparam),
        (LossArg::Reparam, Some(_)) => Err(CliError::usage("--mu only applies to --loss combined")),
        (LossArg::Combined, None) => Err(CliError::usage("--loss combined requires --mu")),
        (LossArg::Combined, Some(mu)) => Ok(Loss::Combined { mu }),
    }
}

/// Invalid pixels are stored as 0 in depth and cost maps; `valid.pfm` holds
/// the 0/1 validity flag.
fn zero_invalid(values: &Raster<f64>, valid: &Raster<bool>) -> PfmImage {
    let w = values.width();
    PfmImage::from_scalar(&Raster::from_fn(
        w,
        values.height(),
        |x, y| {
            if *valid.get(x, y) {
                *values.get(x, y)
            } else {
                0.0
            }
        },
    ))
}

fn masked_mean(values: &Raster<f64>, mask: &Raster<bool>) -> Option<f64> {
    let (sum, count) =
        values.data().iter().zip(mask.data()).filter(|(_, m)| **m).fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// World points of the valid pixels, in raster order.
pub fn world_points(view: &View, depth: &Raster<f64>, valid: &Raster<bool>) -> Vec<Vector3<f64>> {
    let (w, h) = depth.shape();
    (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| *valid.get(x, y))
        .filter_map(|(x, y)| {
            let p = backproject_fronto(&view.intrinsics, Pixel::new(x as f64, y as f64), *depth.get(x, y)).ok()?;
            Some(view.pose.to_world(&p))
        })
        .collect()
}

pub fn cmd_reconstruct(args: &ReconstructArgs, threads: Option<usize>) -> Result<ExitStatus, CliError> {
    let loss = loss_from_args(args)?;
    let model = PatchModel::from(args.model);
    if args.stride == 0 {
        return Err(CliError::usage("--stride must be at least 1"));
    }
    let bench = read_benchmark(&args.benchmark)?;
    if model.requires_normals() && !bench.has_normals() {
        return Err(CliError::usage(format!(
            "the {} model needs normal maps, which this benchmark lacks",
            model.name()
        )));
    }
    if matches!(loss, Loss::Combined { .. }) && !bench.has_normals() {
        return Err(CliError::usage("the combined loss needs normal maps, which this benchmark lacks"));
    }
    if args.reference >= bench.views.len() {
        return Err(CliError::usage(format!(
            "reference {} out of range ({} views)",
            args.reference,
            bench.views.len()
        )));
    }
    let [z0, z1] = match args.zrange.as_deref() {
        Some(&[a, b]) => [a, b],
        Some(_) => return Err(CliError::usage("--zrange takes z_min,z_max")),
        None => bench.manifest.z_range,
    };
    let config = SweepConfig {
        coarse_samples: args.coarse_samples,
        refine_tol: args.refine_tol,
        patch_radius: args.patch_radius,
        loss,
        ..SweepConfig::new(z0, z1, model)
    };
    let sweeper =
        DepthSweeper::new(&bench.views, args.reference, config).map_err(|e| CliError::usage(e.to_string()))?;
    let pool = pool(threads)?;
    let reference = &bench.views[args.reference];
    let maps = &reference.maps;
    let subset = stride_mask(maps.width(), maps.height(), args.stride);
    let evaluated = Raster::from_fn(maps.width(), maps.height(), |x, y| *maps.mask().get(x, y) && *subset.get(x, y));
    let evaluated_count = evaluated.data().iter().filter(|v| **v).count();

    let start = Instant::now();
    let result = reconstruct(&sweeper, &pool, Some(&subset));
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    let valid = result.valid_count();
    let valid_frac = if evaluated_count == 0 { 0.0 } else { valid as f64 / evaluated_count as f64 };
    let depth_error = maps.gt_depth().and_then(|gt| mean_depth_error(&result, gt, &evaluated).ok());
    let mean_gt_depth = maps.gt_depth().and_then(|gt| masked_mean(gt, &evaluated));

    create_dir(&args.out)?;
    write_pfm(&args.out.join("depth.pfm"), &zero_invalid(&result.depth, &result.valid))?;
    write_pfm(&args.out.join("cost.pfm"), &zero_invalid(&result.cost, &result.valid))?;
    write_pfm(&args.out.join("valid.pfm"), &PfmImage::from_scalar(&result.valid.map(|v| f64::from(u8::from(*v)))))?;
    let points = world_points(reference, &result.depth, &result.valid);
    let costs: Vec<f64> =
        result.cost.data().iter().zip(result.valid.data()).filter(|(_, v)| **v).map(|(c, _)| *c).collect();
    write_ply_points(&args.out.join("points.ply"), &points, Some(&costs))?;
    let summary = ReconstructSummary {
        reference: args.reference,
        patch_model: model,
        loss,
        z_range: [z0, z1],
        patch_radius: args.patch_radius,
        stride: args.stride,
        evaluated: evaluated_count,
        valid,
        valid_frac,
        depth_error,
        mean_gt_depth,
        runtime_ms,
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));

    if valid_frac < DEGRADED_FRACTION {
        eprintln!("warning: only {valid} of {evaluated_count} pixels produced a depth");
        return Ok(ExitStatus::Degraded);
    }
    Ok(ExitStatus::Success)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub reference: usize,
    pub depth_error: ErrorSummary,
    /// Depth error divided by the mean ground-truth depth.
    pub relative_mean_depth_err: f64,
    /// Symmetric Chamfer distance to the ground-truth points of the same
    /// pixels.
    pub chamfer: ErrorSummary,
}

/// Rereads the artifacts of `reconstruct`, so it also scores files produced
/// elsewhere in the same layout.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<ExitStatus, CliError> {
    let bench = read_benchmark(&args.benchmark)?;
    let summary: ReconstructSummary = read_json(&args.result.join("summary.json"))?;
    let view = bench
        .views
        .get(summary.reference)
        .ok_or_else(|| CliError::usage(format!("reference {} out of range", summary.reference)))?;
    let gt = view.maps.gt_depth().ok_or_else(|| CliError::usage("benchmark lacks ground-truth depth"))?;
    let scalar = |name: &str| -> Result<Raster<f64>, CliError> {
        let image = read_pfm(&args.result.join(name))?;
        let raster = image.to_scalar()?;
        raster.ensure_shape(gt.width(), gt.height()).map_err(|e| CliError::usage(format!("{name}: {e}")))?;
        Ok(raster)
    };
    let valid = scalar("valid.pfm")?.map(|v| *v > 0.5);
    let depth_values = scalar("depth.pfm")?;
    let depth =
        Raster::from_fn(
            gt.width(),
            gt.height(),
            |x, y| {
                if *valid.get(x, y) {
                    *depth_values.get(x, y)
                } else {
                    f64::NAN
                }
            },
        );
    let result = DepthResult { depth, cost: Raster::filled(gt.width(), gt.height(), 0.0), valid: valid.clone() };
    let subset = stride_mask(gt.width(), gt.height(), summary.stride);
    let evaluated = Raster::from_fn(gt.width(), gt.height(), |x, y| *view.maps.mask().get(x, y) && *subset.get(x, y));
    let depth_error = mean_depth_error(&result, gt, &evaluated).map_err(|e| CliError::usage(e.to_string()))?;
    let mean_gt = masked_mean(gt, &evaluated).unwrap_or(f64::NAN);

    let estimated = read_ply_points(&args.result.join("points.ply"))?.points;
    let both = Raster::from_fn(gt.width(), gt.height(), |x, y| *valid.get(x, y) && *evaluated.get(x, y));
    let reference_points = world_points(view, gt, &both);
    let chamfer = chamfer_distance(&estimated, &reference_points).map_err(|e| CliError::usage(e.to_string()))?;

    let report = EvaluationReport {
        reference: summary.reference,
        depth_error,
        relative_mean_depth_err: depth_error.mean / mean_gt,
        chamfer,
    };
    match &args.out {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(ExitStatus::Success)
}

pub fn cmd_noise_sweep(args: &NoiseSweepArgs, threads: Option<usize>) -> Result<ExitStatus, CliError> {
    let plan: ExperimentPlan = read_json(&args.plan)?;
    plan.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let out = match (&args.out, &plan.output_dir) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => return Err(CliError::usage("no output directory: pass --out or set output_dir")),
    };
    let rows = run_plan(&plan, &pool(threads)?, args.timing).map_err(|e| CliError::usage(e.to_string()))?;
    create_dir(&out)?;
    write_results(&out.join("results.csv"), &rows)?;
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} runs failed; see the error column", rows.len());
    }
    Ok(ExitStatus::Success)
}

pub fn cmd_reparam_check(args: &ReparamCheckArgs) -> Result<ExitStatus, CliError> {
    if args.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let report = reparam_check::run(&CheckOptions {
        trials: args.trials,
        seed: args.seed,
        inject_singular: args.inject_singular,
    });
    for p in &report {
        let verdict = if p.passed() { "ok" } else { "FAILED" };
        println!("{:<22} max residual {:.3e}  {verdict}", p.name, p.max_residual);
    }
    match report.iter().find(|p| !p.passed()) {
        None => Ok(ExitStatus::Success),
        Some(p) => Err(CliError::property(format!(
            "property {} failed{}",
            p.name,
            p.failure.as_deref().map(|f| format!(": {f}")).unwrap_or_default()
        ))),
    }
}
