//! Parametric bootstrap intervals with warm-started short refits.
//!
//! Each replicate simulates a survey at the fitted parameters and density,
//! initializes the refit at the complete-data maximum-likelihood estimate
//! computed from the replicate's known latent state (which sits close to the
//! replicate's own MLE), and then runs only a couple of MCEM iterations.
//! Replicates are independent jobs on derived seed streams.

use serde::{Deserialize, Serialize};

use crate::data::DetectionData;
use crate::error::{Error, Result};
use crate::exec;
use crate::likelihood;
use crate::mcem::{fit, FitConfig, FitResult};
use crate::optim::{maximize, OptimizerConfig};
use crate::params::ModelParams;
use crate::rng;
use crate::simulate::{simulate_calls_only, simulate_survey, CallCountMode, CallRateModel, SimTruth};
use crate::survey::SurveyConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// MCEM iterations per replicate (at least 1; warm starts make few
    /// iterations enough).
    pub warm_iterations: usize,
    /// Confidence level of the percentile intervals.
    pub level: f64,
    pub seed: u64,
    /// Optional cap on concurrent replicates; unlimited when unset.
    pub parallelism: Option<usize>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 100,
            warm_iterations: 2,
            level: 0.95,
            seed: 0,
            parallelism: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicateStatus {
    Ok,
    Degenerate,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub status: ReplicateStatus,
    pub d_c: Option<f64>,
    pub d_a: Option<f64>,
    pub params: Option<ModelParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub outcomes: Vec<ReplicateOutcome>,
    pub level: f64,
    pub ci_d_c: (f64, f64),
    pub ci_d_a: Option<(f64, f64)>,
    /// Coefficient of variation of the replicate density estimates.
    pub cv: f64,
    pub n_failed: usize,
}

/// Empirical percentile interval with linear interpolation between order
/// statistics.
pub fn percentile_ci(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("level {level} must be in (0, 1)")));
    }
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 finite values".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let alpha = (1.0 - level) / 2.0;
    Ok((q(alpha), q(1.0 - alpha)))
}

/// Complete-data maximum likelihood at a known latent state. The arrival-time
/// scale has the closed form of the residual root mean square; the strength
/// parameters start from least squares on the detected (distance, strength)
/// pairs and are polished against the exact likelihood, whose capture terms
/// carry the threshold truncation.
pub fn warm_start_mle(
    truth: &SimTruth,
    data: &DetectionData,
    config: &SurveyConfig,
    threshold: f64,
    opt: &OptimizerConfig,
) -> Result<ModelParams> {
    let latent = truth.to_latent(config.n_detectors());
    let mut n_det = 0.0;
    let mut time_ss = 0.0;
    let mut sum_d = 0.0;
    let mut sum_y = 0.0;
    let mut sum_d2 = 0.0;
    let mut sum_dy = 0.0;
    let mut sum_y2 = 0.0;
    for call in latent.calls() {
        for m in 0..config.n_detectors() {
            if let Some(j) = call.assigned[m] {
                let d = config.distance(m, call.x);
                let r = data.time(m, j) - call.e - d / config.sound_speed;
                time_ss += r * r;
                n_det += 1.0;
                let y = data.strength(m, j);
                sum_d += d;
                sum_y += y;
                sum_d2 += d * d;
                sum_dy += d * y;
                sum_y2 += y * y;
            }
        }
    }
    if n_det < 3.0 {
        return Err(Error::InvalidInput(
            "too few detections for a warm-start estimate".into(),
        ));
    }
    let sigma_t = (time_ss / n_det).sqrt().max(1e-9);

    // Ordinary least squares of strength on distance.
    let sxx = sum_d2 - sum_d * sum_d / n_det;
    let sxy = sum_dy - sum_d * sum_y / n_det;
    let slope = if sxx > 1e-12 { sxy / sxx } else { 0.0 };
    let beta1 = (-slope).max(0.0);
    let beta0 = (sum_y + beta1 * sum_d) / n_det;
    let resid_var = (sum_y2 - 2.0 * beta0 * sum_y + 2.0 * beta1 * sum_dy + n_det * beta0 * beta0
        - 2.0 * beta0 * beta1 * sum_d
        + beta1 * beta1 * sum_d2)
        / n_det;
    let start = ModelParams {
        beta0,
        beta1,
        sigma_s: resid_var.max(1e-4).sqrt(),
        sigma_t,
        threshold,
    };

    // Polish (beta0, beta1, sigma_s) against the exact complete-data
    // likelihood. The time term involves only sigma_t, which is already at
    // its closed-form optimum, so it is left out; sigma_t then has zero
    // gradient and stays put.
    let polish = OptimizerConfig { max_iterations: 40, ..*opt };
    let (p, _) = maximize(
        |p| {
            likelihood::loglik_capture(&latent, config, p)
                + likelihood::loglik_strength(&latent, data, config, p)
        },
        &start,
        &polish,
    )?;
    Ok(p)
}

/// Run the parametric bootstrap around a fit. With a call-rate model the
/// replicates simulate animals at the implied animal density and report both
/// call and animal density; otherwise calls are simulated directly and only
/// call-density intervals are produced.
pub fn bootstrap(
    fit_result: &FitResult,
    call_rate: Option<&CallRateModel>,
    config: &SurveyConfig,
    fit_config: &FitConfig,
    boot: &BootstrapConfig,
) -> Result<BootstrapResult> {
    if boot.replicates == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one replicate".into()));
    }
    if let Some(rate) = call_rate {
        rate.validate()?;
    }
    let mut replicate_fit_config = fit_config.clone();
    replicate_fit_config.mcem.max_iterations = boot.warm_iterations.max(1);

    let run_replicate = |b: usize| -> ReplicateOutcome {
        let seed = rng::child_seed(boot.seed, b as u64);
        let mut sim_rng = rng::stream(seed, &[0xB0]);
        let sim = match call_rate {
            Some(rate) => {
                let d_a = fit_result.density.d_c / rate.mean();
                simulate_survey(d_a, rate, CallCountMode::Poisson, config, &fit_result.params, &mut sim_rng)
            }
            None => simulate_calls_only(fit_result.density.d_c, config, &fit_result.params, &mut sim_rng),
        };
        let (data, truth) = match sim {
            Ok(v) => v,
            Err(_) => {
                return ReplicateOutcome {
                    replicate: b,
                    seed,
                    status: ReplicateStatus::Failed,
                    d_c: None,
                    d_a: None,
                    params: None,
                }
            }
        };
        if data.total() < 3 {
            return ReplicateOutcome {
                replicate: b,
                seed,
                status: ReplicateStatus::Degenerate,
                d_c: None,
                d_a: None,
                params: None,
            };
        }
        let init = warm_start_mle(&truth, &data, config, fit_result.params.threshold, &fit_config.optimizer).ok();
        let mut cfg_b = replicate_fit_config.clone();
        cfg_b.seed = rng::child_seed(seed, 0xF1);
        match fit(&data, config, init, &cfg_b) {
            Ok(r) if r.status != crate::mcem::FitStatus::NoEstimableCalls => ReplicateOutcome {
                replicate: b,
                seed,
                status: ReplicateStatus::Ok,
                d_c: Some(r.density.d_c),
                d_a: call_rate.map(|rate| r.density.d_c / rate.mean()),
                params: Some(r.params),
            },
            Ok(_) => ReplicateOutcome {
                replicate: b,
                seed,
                status: ReplicateStatus::Degenerate,
                d_c: None,
                d_a: None,
                params: None,
            },
            Err(_) => ReplicateOutcome {
                replicate: b,
                seed,
                status: ReplicateStatus::Failed,
                d_c: None,
                d_a: None,
                params: None,
            },
        }
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<ReplicateOutcome> = match boot.parallelism {
        Some(k) if k > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            pool.install(|| exec::map_indexed(boot.replicates, run_replicate))
        }
        _ => exec::map_indexed(boot.replicates, run_replicate),
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<ReplicateOutcome> = exec::map_indexed(boot.replicates, run_replicate);

    let values: Vec<f64> = outcomes.iter().filter_map(|o| o.d_c).collect();
    let n_failed = outcomes.len() - values.len();
    if n_failed * 5 > outcomes.len() {
        return Err(Error::TooManyBootstrapFailures { failed: n_failed, total: outcomes.len() });
    }
    let ci_d_c = percentile_ci(&values, boot.level)?;
    let ci_d_a = match call_rate {
        Some(_) => {
            let da: Vec<f64> = outcomes.iter().filter_map(|o| o.d_a).collect();
            Some(percentile_ci(&da, boot.level)?)
        }
        None => None,
    };
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64)
        .sqrt();
    Ok(BootstrapResult {
        outcomes,
        level: boot.level,
        ci_d_c,
        ci_d_a,
        cv: sd / mean,
        n_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn percentile_ci_interpolated_hand_case() {
        // 1..100 at level 0.95 under linear interpolation of order statistics.
        let values: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let (lo, hi) = percentile_ci(&values, 0.95).unwrap();
        assert!((lo - 3.475).abs() < 1e-12, "{lo}");
        assert!((hi - 97.525).abs() < 1e-12, "{hi}");
    }

    #[test]
    fn percentile_ci_constant_values_degenerate() {
        let values = vec![4.2; 10];
        let (lo, hi) = percentile_ci(&values, 0.95).unwrap();
        assert_eq!((lo, hi), (4.2, 4.2));
    }

    #[test]
    fn percentile_ci_rejects_bad_inputs() {
        assert!(percentile_ci(&[1.0, 2.0], 0.0).is_err());
        assert!(percentile_ci(&[1.0, 2.0], 1.0).is_err());
        assert!(percentile_ci(&[1.0], 0.95).is_err());
    }

    #[test]
    fn percentile_ci_widens_with_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..200).map(|_| rand::Rng::random_range(&mut rng, 0.0..10.0)).collect();
        let mut prev = (5.0, 5.0);
        for level in [0.5, 0.8, 0.9, 0.95, 0.99] {
            let ci = percentile_ci(&values, level).unwrap();
            assert!(ci.0 <= prev.0 + 1e-12 && ci.1 >= prev.1 - 1e-12);
            prev = ci;
        }
    }

    #[test]
    fn percentile_ci_is_permutation_invariant() {
        let values: Vec<f64> = vec![9.0, 1.0, 5.0, 3.0, 7.0, 2.0, 8.0, 4.0, 6.0, 10.0];
        let mut shuffled = values.clone();
        shuffled.reverse();
        assert_eq!(
            percentile_ci(&values, 0.9).unwrap(),
            percentile_ci(&shuffled, 0.9).unwrap()
        );
    }

    mod warm_start {
        use super::super::*;
        use crate::testing::{six_detector_config, true_params};
        use crate::simulate::simulate_calls_only;

        #[test]
        fn noise_free_strengths_recover_the_line() {
            let cfg = six_detector_config();
            // Nearly noise-free strengths and times.
            let truth_params = ModelParams {
                sigma_s: 1e-3,
                sigma_t: 1e-6,
                ..true_params()
            };
            let mut rng = crate::rng::stream(5, &[10]);
            let (data, truth) = simulate_calls_only(2e-3, &cfg, &truth_params, &mut rng).unwrap();
            assert!(data.total() > 10);
            let p = warm_start_mle(&truth, &data, &cfg, truth_params.threshold, &OptimizerConfig::default())
                .unwrap();
            assert!((p.beta0 - truth_params.beta0).abs() < 0.1, "{}", p.beta0);
            assert!((p.beta1 - truth_params.beta1).abs() < 0.02, "{}", p.beta1);
        }

        #[test]
        fn sigma_t_equals_residual_rms() {
            let cfg = six_detector_config();
            let tp = true_params();
            let mut rng = crate::rng::stream(6, &[11]);
            let (data, truth) = simulate_calls_only(2e-3, &cfg, &tp, &mut rng).unwrap();
            let p = warm_start_mle(&truth, &data, &cfg, tp.threshold, &OptimizerConfig::default())
                .unwrap();
            // Recompute the residual RMS directly.
            let latent = truth.to_latent(cfg.n_detectors());
            let mut ss = 0.0;
            let mut n = 0.0;
            for call in latent.calls() {
                for m in 0..cfg.n_detectors() {
                    if let Some(j) = call.assigned[m] {
                        let r = data.time(m, j) - call.e - cfg.travel_time(m, call.x);
                        ss += r * r;
                        n += 1.0;
                    }
                }
            }
            assert!((p.sigma_t - (ss / n).sqrt()).abs() < 1e-12);
        }

        #[test]
        fn warm_start_lands_near_truth() {
            let cfg = six_detector_config();
            let tp = true_params();
            let mut rng = crate::rng::stream(7, &[12]);
            let (data, truth) = simulate_calls_only(3e-3, &cfg, &tp, &mut rng).unwrap();
            let p = warm_start_mle(&truth, &data, &cfg, tp.threshold, &OptimizerConfig::default())
                .unwrap();
            // Loose 3-standard-error-flavored bounds at this sample size.
            assert!((p.beta0 - tp.beta0).abs() < 3.0, "beta0 {}", p.beta0);
            assert!((p.beta1 - tp.beta1).abs() < 0.5, "beta1 {}", p.beta1);
            assert!((p.sigma_s - tp.sigma_s).abs() < 2.0, "sigma_s {}", p.sigma_s);
            assert!((p.sigma_t - tp.sigma_t).abs() < 0.002, "sigma_t {}", p.sigma_t);
        }
    }
}
