//! The fitting loop: partition, then alternate Monte Carlo E-steps and
//! M-steps until the parameter and density estimates settle.

use serde::{Deserialize, Serialize};

use crate::data::DetectionData;
use crate::error::{Error, Result};
use crate::estep::{run_estep, EstepDiagnostics, SamplerConfig};
use crate::latent::LatentState;
use crate::mstep::{estimate_density, maximize_elbo, ElboObjective};
use crate::optim::OptimizerConfig;
use crate::params::{DensityEstimate, MinDetectors, ModelParams};
use crate::partition::{self, partition_detections};
use crate::rng;
use crate::survey::SurveyConfig;

/// MCEM loop settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McemConfig {
    pub max_iterations: usize,
    /// Relative per-parameter tolerance on theta over the convergence window.
    pub tol_theta: f64,
    /// Relative tolerance on the density estimate over the window.
    pub tol_density: f64,
    /// Iterations that must all sit within tolerance before stopping.
    pub window: usize,
    /// Sample-size growth per iteration: n_samples * ceil(growth^r), capped
    /// at cap_factor * n_samples.
    pub growth: f64,
    pub cap_factor: usize,
}

impl Default for McemConfig {
    fn default() -> Self {
        McemConfig {
            max_iterations: 12,
            tol_theta: 0.01,
            tol_density: 0.01,
            window: 3,
            growth: 1.2,
            cap_factor: 10,
        }
    }
}

impl McemConfig {
    /// Retained-sample schedule for iteration r (0-based); non-decreasing.
    pub fn samples_at(&self, base: usize, r: usize) -> usize {
        let factor = self.growth.powi(r as i32).ceil() as usize;
        (base * factor).min(base * self.cap_factor.max(1)).max(base)
    }
}

/// Everything `fit` needs besides the data: initial parameters come either
/// from a moment-style initializer or are supplied directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub min_detectors: MinDetectors,
    /// Partition slack sigma (seconds); defaults to 3x the time prior.
    pub sigma_slack: f64,
    /// Prior guess for the arrival-time standard deviation, used by the
    /// initializer and the partition default.
    pub sigma_t_prior: f64,
    pub threshold: f64,
    pub mcem: McemConfig,
    pub sampler: SamplerConfig,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            min_detectors: MinDetectors::Two,
            sigma_slack: partition::default_sigma_slack(),
            sigma_t_prior: partition::DEFAULT_SIGMA_T_PRIOR,
            threshold: 0.0,
            mcem: McemConfig::default(),
            sampler: SamplerConfig::default(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    /// No call ever reached the detection minimum; density is not estimable.
    NoEstimableCalls,
}

/// One MCEM iteration record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub params: ModelParams,
    /// ELBO of this iteration's samples at the incoming parameters.
    pub elbo_start: f64,
    /// ELBO of the same samples at the maximized parameters.
    pub elbo: f64,
    pub elbo_se: f64,
    pub d_c: f64,
    pub n_obs_mean: f64,
    pub n_samples: usize,
    pub capture_rate: f64,
    pub location_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n_groups: usize,
    pub max_size: usize,
    pub mean_size: f64,
    pub total_detections: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub density: DensityEstimate,
    pub n_obs_mean: f64,
    pub status: FitStatus,
    pub trace: Vec<IterationRecord>,
    pub groups: GroupSummary,
    pub min_detectors: MinDetectors,
    pub seed: u64,
    pub fit_seconds: f64,
    /// Per-sample observed-call counts from the final E-step.
    pub final_sample_counts: Vec<usize>,
    pub diagnostics: EstepDiagnostics,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

/// Moment-style starting values: the loudest detection anchors the source
/// strength, greedily matched cross-detector detections anchor the
/// attenuation and strength spread, and the time prior seeds sigma_t.
pub fn initialize_params(
    data: &DetectionData,
    config: &SurveyConfig,
    fit: &FitConfig,
) -> ModelParams {
    let strengths: Vec<f64> = (0..config.n_detectors())
        .flat_map(|m| data.detector(m).iter().map(|d| d.1))
        .collect();
    let n = strengths.len() as f64;
    let (mean, sd) = if strengths.len() >= 2 {
        let mean = strengths.iter().sum::<f64>() / n;
        let var = strengths.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    } else {
        (strengths.first().copied().unwrap_or(fit.threshold + 10.0), 0.0)
    };
    let max_y = strengths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let beta0 = if max_y.is_finite() { max_y + sd.max(1.0) } else { fit.threshold + 10.0 };
    let _ = mean;

    // Greedy cross-detector matching via the sampler's initializer. A call
    // heard on detectors a spacing s apart has a source-distance difference
    // bounded by s, so its squared strength spread grows like beta1² s²/3
    // plus a flat noise floor; regressing spread² on s² across calls
    // separates the attenuation from the noise. The pooled within-call
    // spread seeds sigma_s.
    let groups = partition_detections(data, config, fit.sigma_slack);
    let mut pairs: Vec<(f64, f64)> = Vec::new(); // (geo², spread²)
    let mut within_ss = 0.0;
    let mut within_df = 0.0;
    let mut rng = rng::stream(fit.seed, &[0x1717]);
    for group in &groups {
        let latent = crate::estep::init_latent(group, config, &fit.sampler, &mut rng);
        for call in latent.calls() {
            let detected: Vec<(usize, usize)> = (0..config.n_detectors())
                .filter_map(|m| call.assigned[m].map(|j| (m, j)))
                .collect();
            if detected.len() < 2 {
                continue;
            }
            let ys: Vec<f64> = detected.iter().map(|&(m, j)| group.data.strength(m, j)).collect();
            let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
            within_ss += ys.iter().map(|y| (y - ybar) * (y - ybar)).sum::<f64>();
            within_df += (ys.len() - 1) as f64;
            let spread = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - ys.iter().copied().fold(f64::INFINITY, f64::min);
            let mut geo: f64 = 0.0;
            for (a, &(ma, _)) in detected.iter().enumerate() {
                for &(mb, _) in &detected[a + 1..] {
                    geo = geo.max(config.position(ma).dist(config.position(mb)));
                }
            }
            if geo > 1e-9 {
                pairs.push((geo * geo, spread * spread));
            }
        }
    }
    let beta1 = if pairs.len() >= 3 {
        let nd = pairs.len() as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nd;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / nd;
        let sxx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 1e-9 {
            (3.0 * (sxy / sxx).max(0.0)).sqrt()
        } else {
            // Single pair geometry: fall back to the raw spread bound.
            let mean_ratio = (my / mx).max(0.0);
            (3.0 * mean_ratio).sqrt()
        }
    } else {
        0.0
    };
    let sigma_s = if within_df >= 1.0 {
        (within_ss / within_df).sqrt().max(1e-2)
    } else {
        sd.max(1e-2)
    };
    ModelParams {
        beta0,
        beta1,
        sigma_s,
        sigma_t: fit.sigma_t_prior.max(1e-6),
        threshold: fit.threshold,
    }
}

fn relative_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn params_change(a: &ModelParams, b: &ModelParams) -> f64 {
    relative_change(a.beta0, b.beta0)
        .max(relative_change(a.beta1.max(1e-9), b.beta1.max(1e-9)))
        .max(relative_change(a.sigma_s, b.sigma_s))
        .max(relative_change(a.sigma_t, b.sigma_t))
}

/// Fit the model: partition the detections, then iterate E-steps and M-steps
/// from `init` (or the moment initializer) until the window criterion or the
/// iteration cap. Non-convergence is reported in the result status, never as
/// an error. Deterministic for a fixed `fit.seed` at any thread count.
pub fn fit(
    data: &DetectionData,
    config: &SurveyConfig,
    init: Option<ModelParams>,
    fit_config: &FitConfig,
) -> Result<FitResult> {
    let t_start = std::time::Instant::now();
    if data.total() == 0 {
        return Err(Error::InvalidInput("no detections to fit".into()));
    }
    let groups = partition_detections(data, config, fit_config.sigma_slack);
    let sizes: Vec<usize> = groups.iter().map(|g| g.n_detections()).collect();
    let group_summary = GroupSummary {
        n_groups: groups.len(),
        max_size: sizes.iter().copied().max().unwrap_or(0),
        mean_size: sizes.iter().sum::<usize>() as f64 / sizes.len().max(1) as f64,
        total_detections: data.total(),
    };

    let mut params = match init {
        Some(p) => {
            p.validate()?;
            p
        }
        None => initialize_params(data, config, fit_config),
    };
    let min = fit_config.min_detectors;

    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut warm: Option<Vec<LatentState>> = None;
    let mut status = FitStatus::MaxIterations;
    let mut density = DensityEstimate { d_c: 0.0, n_hat: 0.0, p_bar: 0.0 };
    let mut n_obs_mean = 0.0;
    let mut final_counts: Vec<usize> = Vec::new();
    let mut diagnostics = EstepDiagnostics::default();

    for r in 0..fit_config.mcem.max_iterations {
        let mut sampler = fit_config.sampler.clone();
        sampler.n_samples = fit_config.mcem.samples_at(fit_config.sampler.n_samples, r);
        let estep = run_estep(
            &groups,
            config,
            &params,
            &sampler,
            warm.as_deref(),
            rng::child_seed(fit_config.seed, r as u64),
        )?;
        warm = Some(estep.final_states.clone());
        diagnostics = estep.diagnostics;

        final_counts = (0..sampler.n_samples)
            .map(|delta| estep.samples.iter().map(|g| g[delta].n_observed(min.count())).sum())
            .collect();
        n_obs_mean =
            final_counts.iter().sum::<usize>() as f64 / final_counts.len().max(1) as f64;
        if n_obs_mean == 0.0 {
            status = FitStatus::NoEstimableCalls;
            break;
        }

        let objective = ElboObjective::new(&estep.samples, &groups, config, min)?;
        let elbo_start = objective.value(&params);
        let (next, _summary) = maximize_elbo(&objective, &params, &fit_config.optimizer)?;
        let elbo = objective.value(&next);
        let elbo_se = objective.mc_standard_error(&next);
        density = estimate_density(&estep.samples, &next, config, min)?;
        params = next;

        trace.push(IterationRecord {
            iteration: r,
            params,
            elbo_start,
            elbo,
            elbo_se,
            d_c: density.d_c,
            n_obs_mean,
            n_samples: sampler.n_samples,
            capture_rate: estep.diagnostics.capture_rate(),
            location_rate: estep.diagnostics.location_rate(),
        });

        // Converged when every consecutive pair in the trailing window moved
        // less than the tolerances.
        let w = fit_config.mcem.window.max(1);
        if trace.len() > w {
            let tail = &trace[trace.len() - (w + 1)..];
            let ok = tail.windows(2).all(|pair| {
                params_change(&pair[1].params, &pair[0].params) < fit_config.mcem.tol_theta
                    && relative_change(pair[1].d_c, pair[0].d_c) < fit_config.mcem.tol_density
            });
            if ok {
                status = FitStatus::Converged;
                break;
            }
        }
    }

    Ok(FitResult {
        params,
        density,
        n_obs_mean,
        status,
        trace,
        groups: group_summary,
        min_detectors: min,
        seed: fit_config.seed,
        fit_seconds: t_start.elapsed().as_secs_f64(),
        final_sample_counts: final_counts,
        diagnostics,
    })
}
