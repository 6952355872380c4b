//! Noise-robustness experiments: reconstruct a reference view of the
//! synthetic benchmark under increasing normal noise, for several patch
//! models and losses, and tabulate the depth error.

use std::time::Instant;

use radiant_core::metrics::mean_depth_error;
use radiant_core::raster::Raster;
use radiant_core::sweep::{DepthSweeper, Loss, PatchModel, SweepConfig};
use radiant_core::synth::{apply_noise, generate, NoiseSpec, SynthConfig};
use radiant_core::View;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::io::results::ResultRow;
use crate::parallel::{reconstruct, stride_mask};

fn default_true() -> bool {
    true
}

fn default_stride() -> usize {
    1
}

fn default_patch_radius() -> usize {
    SweepConfig::DEFAULT_PATCH_RADIUS
}

fn default_coarse_samples() -> usize {
    SweepConfig::DEFAULT_COARSE_SAMPLES
}

fn default_refine_tol() -> f64 {
    SweepConfig::DEFAULT_REFINE_TOL
}

/// Experiment grid. Rows are produced for every combination of noise level,
/// patch model, loss variant and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    /// Benchmark to perturb; its own noise settings are ignored.
    #[serde(default)]
    pub config: SynthConfig,
    pub noise_sigmas_deg: Vec<f64>,
    /// Reflectance noise std as a fraction of the maximum reflectance.
    #[serde(default)]
    pub reflectance_noise_frac: f64,
    pub models: Vec<PatchModel>,
    /// Run the re-parametrized loss.
    #[serde(default = "default_true")]
    pub reparam: bool,
    /// One combined-loss run per weight.
    #[serde(default)]
    pub mu_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub reference: usize,
    /// Reconstruct only every `pixel_stride`-th pixel in each direction.
    #[serde(default = "default_stride")]
    pub pixel_stride: usize,
    #[serde(default = "default_patch_radius")]
    pub patch_radius: usize,
    #[serde(default = "default_coarse_samples")]
    pub coarse_samples: usize,
    #[serde(default = "default_refine_tol")]
    pub refine_tol: f64,
    /// Defaults to the benchmark's depth range.
    #[serde(default)]
    pub z_range: Option<[f64; 2]>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid plan: {0}")]
pub struct PlanError(pub String);

impl ExperimentPlan {
    pub fn new(noise_sigmas_deg: Vec<f64>, models: Vec<PatchModel>, seeds: Vec<u64>) -> Self {
        Self {
            config: SynthConfig::default(),
            noise_sigmas_deg,
            reflectance_noise_frac: 0.0,
            models,
            reparam: true,
            mu_grid: Vec::new(),
            seeds,
            reference: 0,
            pixel_stride: 1,
            patch_radius: default_patch_radius(),
            coarse_samples: default_coarse_samples(),
            refine_tol: default_refine_tol(),
            z_range: None,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let fail = |msg: &str| Err(PlanError(msg.to_owned()));
        if self.noise_sigmas_deg.is_empty() {
            return fail("noise_sigmas_deg is empty");
        }
        if !self.noise_sigmas_deg.iter().all(|s| *s >= 0.0 && s.is_finite()) {
            return fail("noise sigmas must be finite and nonnegative");
        }
        if !(self.reflectance_noise_frac >= 0.0 && self.reflectance_noise_frac.is_finite()) {
            return fail("reflectance_noise_frac must be finite and nonnegative");
        }
        if self.models.is_empty() {
            return fail("models is empty");
        }
        if self.seeds.is_empty() {
            return fail("seeds is empty");
        }
        if !self.reparam && self.mu_grid.is_empty() {
            return fail("no loss selected: enable reparam or give a mu_grid");
        }
        if !self.mu_grid.iter().all(|m| *m >= 0.0 && m.is_finite()) {
            return fail("mu values must be finite and nonnegative");
        }
        if self.pixel_stride == 0 {
            return fail("pixel_stride must be at least 1");
        }
        if self.reference >= self.config.cameras.count {
            return fail("reference view index out of range");
        }
        self.config.validate().map_err(|e| PlanError(format!("config: {e}")))?;
        self.sweep_config(PatchModel::Surface, Loss::Reparam).validate().map_err(|e| PlanError(format!("search: {e}")))
    }

    pub fn losses(&self) -> Vec<Loss> {
        let combined = self.mu_grid.iter().map(|&mu| Loss::Combined { mu });
        self.reparam.then_some(Loss::Reparam).into_iter().chain(combined).collect()
    }

    pub fn sweep_config(&self, model: PatchModel, loss: Loss) -> SweepConfig {
        let (z0, z1) = self.z_range.map_or_else(|| self.config.depth_range(), |[a, b]| (a, b));
        SweepConfig {
            coarse_samples: self.coarse_samples,
            refine_tol: self.refine_tol,
            patch_radius: self.patch_radius,
            loss,
            ..SweepConfig::new(z0, z1, model)
        }
    }
}

/// `sigma2_slanted_combined_mu0.1_seed3`
pub fn experiment_id(sigma: f64, model: PatchModel, loss: Loss, seed: u64) -> String {
    let loss_part = match loss {
        Loss::Reparam => "reparam".to_owned(),
        Loss::Combined { mu } => format!("combined_mu{mu}"),
    };
    format!("sigma{sigma}_{}_{loss_part}_seed{seed}", model.name())
}

/// Rows in plan order: noise level, then model, then loss, then seed.
/// Failures are reported in the row's `error` column.
pub fn run_plan(plan: &ExperimentPlan, pool: &ThreadPool, timing: bool) -> Result<Vec<ResultRow>, PlanError> {
    plan.validate()?;
    let clean_config = SynthConfig { noise: NoiseSpec::default(), ..plan.config.clone() };
    let clean = generate(&clean_config).map_err(|e| PlanError(format!("benchmark generation: {e}")))?;
    let reference = &clean[plan.reference].maps;
    let gt = reference.gt_depth().ok_or_else(|| PlanError("benchmark lacks ground-truth depth".into()))?;
    let subset = stride_mask(reference.width(), reference.height(), plan.pixel_stride);
    let evaluated =
        Raster::from_fn(reference.width(), reference.height(), |x, y| *reference.mask().get(x, y) && *subset.get(x, y));
    let evaluated_count = evaluated.data().iter().filter(|v| **v).count();

    let mut rows = Vec::new();
    for &sigma in &plan.noise_sigmas_deg {
        let noisy: Vec<Vec<View>> = plan
            .seeds
            .iter()
            .map(|&seed| {
                let spec =
                    NoiseSpec { normal_sigma_deg: sigma, reflectance_sigma_frac: plan.reflectance_noise_frac, seed };
                perturb(&clean, &spec)
            })
            .collect();
        for &model in &plan.models {
            for loss in plan.losses() {
                for (views, &seed) in noisy.iter().zip(&plan.seeds) {
                    let mut row = ResultRow {
                        experiment_id: experiment_id(sigma, model, loss, seed),
                        noise_sigma_deg: sigma,
                        patch_model: model.name().to_owned(),
                        loss: loss.name().to_owned(),
                        mu: loss.mu(),
                        seed,
                        mean_depth_err: None,
                        median: None,
                        std: None,
                        valid_frac: None,
                        runtime_ms: None,
                        error: String::new(),
                    };
                    let start = Instant::now();
                    let outcome = DepthSweeper::new(views, plan.reference, plan.sweep_config(model, loss))
                        .map(|sweeper| reconstruct(&sweeper, pool, Some(&subset)));
                    if timing {
                        row.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
                    }
                    match outcome.and_then(|result| {
                        let valid = result.valid_count();
                        mean_depth_error(&result, gt, &evaluated).map(|s| (s, valid))
                    }) {
                        Ok((summary, valid)) => {
                            row.mean_depth_err = Some(summary.mean);
                            row.median = Some(summary.median);
                            row.std = Some(summary.std);
                            row.valid_frac = Some(valid as f64 / evaluated_count as f64);
                        }
                        Err(e) => row.error = e.to_string(),
                    }
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

/// View `i` draws its noise from stream `i` of `spec.seed`.
pub fn perturb(views: &[View], spec: &NoiseSpec) -> Vec<View> {
    views.iter().enumerate().map(|(i, v)| View { maps: apply_noise(&v.maps, spec, i as u64), ..v.clone() }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_losses() {
        let mut plan = ExperimentPlan::new(vec![0.0], vec![PatchModel::Slanted], vec![1]);
        plan.mu_grid = vec![0.01, 10.0];
        assert_eq!(plan.losses(), vec![Loss::Reparam, Loss::Combined { mu: 0.01 }, Loss::Combined { mu: 10.0 }]);
        assert_eq!(
            experiment_id(2.0, PatchModel::Slanted, Loss::Combined { mu: 0.1 }, 3),
            "sigma2_slanted_combined_mu0.1_seed3"
        );
        assert_eq!(experiment_id(0.5, PatchModel::FrontoParallel, Loss::Reparam, 0), "sigma0.5_fronto_reparam_seed0");
    }

    #[test]
    fn validation() {
        let plan = ExperimentPlan::new(vec![0.0, 2.0], PatchModel::ALL.to_vec(), vec![1, 2]);
        assert_eq!(plan.validate(), Ok(()));
        let broken = [
            ExperimentPlan { noise_sigmas_deg: vec![], ..plan.clone() },
            ExperimentPlan { noise_sigmas_deg: vec![-1.0], ..plan.clone() },
            ExperimentPlan { models: vec![], ..plan.clone() },
            ExperimentPlan { seeds: vec![], ..plan.clone() },
            ExperimentPlan { reparam: false, ..plan.clone() },
            ExperimentPlan { mu_grid: vec![f64::NAN], ..plan.clone() },
            ExperimentPlan { pixel_stride: 0, ..plan.clone() },
            ExperimentPlan { reference: 5, ..plan.clone() },
        ];
        for p in broken {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn plan_json_uses_defaults() {
        let plan: ExperimentPlan =
            serde_json::from_str(r#"{"noise_sigmas_deg": [0, 2], "models": ["surface"], "seeds": [7]}"#).unwrap();
        assert_eq!(plan, ExperimentPlan::new(vec![0.0, 2.0], vec![PatchModel::Surface], vec![7]));
        let models: Vec<PatchModel> = serde_json::from_str(r#"["fronto", "slanted", "surface"]"#).unwrap();
        assert_eq!(models, PatchModel::ALL);
    }
}
