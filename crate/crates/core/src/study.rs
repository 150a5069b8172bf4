//! Simulation study harness: repeated simulate-fit cycles with bias, spread,
//! skewness, and optional bootstrap-coverage summaries.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap, BootstrapConfig};
use crate::error::{Error, Result};
use crate::exec;
use crate::mcem::{fit, FitConfig, FitStatus};
use crate::norm;
use crate::params::ModelParams;
use crate::rng;
use crate::simulate::simulate_calls_only;
use crate::survey::SurveyConfig;

/// A generative setting: survey layout, true parameters, true call density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub config: SurveyConfig,
    pub params: ModelParams,
    pub d_c: f64,
}

impl Scenario {
    /// Six-detector, 25-second test scenario sized so a survey yields on the
    /// order of a hundred detections.
    pub fn six_detector_default() -> Scenario {
        use crate::geom::{Point, SurveyRegion};
        use crate::survey::Detector;
        let region = SurveyRegion::rectangle(-30.0, -30.0, 30.0, 30.0, 64).unwrap();
        let dets = vec![
            Detector { id: 1, position: Point::new(-8.0, -5.0) },
            Detector { id: 2, position: Point::new(0.0, -5.5) },
            Detector { id: 3, position: Point::new(8.0, -5.0) },
            Detector { id: 4, position: Point::new(-8.0, 5.0) },
            Detector { id: 5, position: Point::new(0.0, 5.5) },
            Detector { id: 6, position: Point::new(8.0, 5.0) },
        ];
        let config = SurveyConfig::new(region, dets, 25.0, 330.0).unwrap();
        Scenario {
            config,
            params: ModelParams {
                beta0: 150.0,
                beta1: 2.5,
                sigma_s: 8.0,
                sigma_t: 0.005,
                threshold: 130.0,
            },
            d_c: 3.0e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub replicates: usize,
    /// Number of datasets (taken in order) that also get a bootstrap for the
    /// coverage estimate; zero skips coverage.
    pub coverage_subset: usize,
    pub bootstrap: BootstrapConfig,
    pub fit: FitConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyResult {
    pub d_c_true: f64,
    pub replicates: usize,
    pub n_failed: usize,
    /// Successful density estimates, in dataset order.
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub relative_bias: f64,
    pub cv: f64,
    pub skewness: f64,
    /// Coverage of the percentile interval over the subset, when requested.
    pub coverage: Option<f64>,
    pub coverage_subset: usize,
    pub coverage_failures: usize,
    /// (standard normal quantile, sorted estimate) pairs.
    pub qq: Vec<(f64, f64)>,
}

/// Sample skewness m3 / m2^{3/2}.
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Run the study: simulate `replicates` independent surveys from the
/// scenario, fit each, and summarize; bootstrap the leading subset for
/// coverage when asked.
pub fn run_study(scenario: &Scenario, study: &StudyConfig) -> Result<StudyResult> {
    if study.replicates < 2 {
        return Err(Error::InvalidInput("study needs at least 2 replicates".into()));
    }

    let fits: Vec<Option<(f64, crate::mcem::FitResult)>> =
        exec::map_indexed(study.replicates, |i| {
            let seed = rng::child_seed(study.seed, i as u64);
            let mut sim_rng = rng::stream(seed, &[0x51]);
            let (data, _truth) =
                simulate_calls_only(scenario.d_c, &scenario.config, &scenario.params, &mut sim_rng)
                    .ok()?;
            if data.total() < 3 {
                return None;
            }
            let mut fit_cfg = study.fit.clone();
            fit_cfg.threshold = scenario.params.threshold;
            fit_cfg.seed = rng::child_seed(seed, 0xF0);
            match fit(&data, &scenario.config, None, &fit_cfg) {
                Ok(r) if r.status != FitStatus::NoEstimableCalls => Some((r.density.d_c, r)),
                _ => None,
            }
        });

    let estimates: Vec<f64> = fits.iter().flatten().map(|(d, _)| *d).collect();
    let n_failed = study.replicates - estimates.len();
    if estimates.len() < 2 {
        return Err(Error::InvalidInput("too few successful fits to summarize".into()));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let sd = (estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();

    let mut sorted = estimates.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let qq: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (norm::quantile((i as f64 + 0.5) / n), v))
        .collect();

    let coverage_subset = study.coverage_subset.min(study.replicates);
    let mut coverage = None;
    let mut coverage_failures = 0;
    if coverage_subset > 0 {
        let mut covered = 0usize;
        let mut assessed = 0usize;
        for (i, entry) in fits.iter().take(coverage_subset).enumerate() {
            let Some((_, fit_result)) = entry else {
                coverage_failures += 1;
                continue;
            };
            let mut boot_cfg = study.bootstrap.clone();
            boot_cfg.seed = rng::child_seed(rng::child_seed(study.seed, i as u64), 0xB5);
            let mut fit_cfg = study.fit.clone();
            fit_cfg.threshold = scenario.params.threshold;
            match bootstrap(fit_result, None, &scenario.config, &fit_cfg, &boot_cfg) {
                Ok(b) => {
                    assessed += 1;
                    if b.ci_d_c.0 <= scenario.d_c && scenario.d_c <= b.ci_d_c.1 {
                        covered += 1;
                    }
                }
                Err(_) => coverage_failures += 1,
            }
        }
        if assessed > 0 {
            coverage = Some(covered as f64 / assessed as f64);
        }
    }

    Ok(StudyResult {
        d_c_true: scenario.d_c,
        replicates: study.replicates,
        n_failed,
        mean,
        sd,
        relative_bias: (mean - scenario.d_c) / scenario.d_c,
        cv: sd / mean,
        skewness: skewness(&estimates),
        estimates,
        coverage,
        coverage_subset,
        coverage_failures,
        qq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skewness_signs() {
        let right = vec![1.0, 1.1, 0.9, 1.05, 0.95, 3.0];
        assert!(skewness(&right) > 0.0);
        let left = vec![-3.0, 1.0, 1.1, 0.9, 1.05, 0.95];
        assert!(skewness(&left) < 0.0);
        let sym = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
        assert!(skewness(&sym).abs() < 1e-12);
    }

    #[test]
    fn qq_quantiles_are_monotone() {
        use crate::estep::SamplerConfig;
        use crate::mcem::McemConfig;
        let scenario = Scenario::six_detector_default();
        let study = StudyConfig {
            replicates: 4,
            coverage_subset: 0,
            bootstrap: BootstrapConfig { replicates: 5, ..Default::default() },
            fit: FitConfig {
                sampler: SamplerConfig { n_samples: 30, burn_in: 60, thinning: 1, ..Default::default() },
                mcem: McemConfig { max_iterations: 3, ..Default::default() },
                ..Default::default()
            },
            seed: 5,
        };
        let result = run_study(&scenario, &study).unwrap();
        assert!(result.qq.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        assert_eq!(result.qq.len(), result.estimates.len());
        assert!(result.mean > 0.0);
    }
}
