//! Detection-function components: detection probability at distance, the
//! truncated signal-strength density, the arrival-time density, and spatial
//! aggregates over the survey region.
//!
//! A sound is detected exactly when its received strength crosses the
//! threshold, so with strengths y | d ~ N(beta0 - beta1 d, sigma_s²) the
//! detection probability is g(d) = 1 - Phi((c - (beta0 - beta1 d))/sigma_s)
//! and the observed strength given detection follows the lower-truncated
//! normal on [c, inf).

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::norm;
use crate::params::{MinDetectors, ModelParams};
use crate::survey::SurveyConfig;

/// Expected received strength at distance `d`.
pub fn expected_strength(d: f64, params: &ModelParams) -> f64 {
    params.beta0 - params.beta1 * d
}

/// Detection probability at distance `d`; non-increasing in `d`.
pub fn detect_prob(d: f64, params: &ModelParams) -> Result<f64> {
    if !d.is_finite() || d < 0.0 {
        return Err(Error::InvalidInput(format!("distance {d} must be finite and >= 0")));
    }
    Ok(detect_prob_unchecked(d, params))
}

#[inline]
pub(crate) fn detect_prob_unchecked(d: f64, params: &ModelParams) -> f64 {
    norm::sf((params.threshold - expected_strength(d, params)) / params.sigma_s)
}

/// ln g(d), stable deep into the tail.
#[inline]
pub(crate) fn ln_detect_prob(d: f64, params: &ModelParams) -> f64 {
    norm::ln_sf((params.threshold - expected_strength(d, params)) / params.sigma_s)
}

/// ln(1 - g(d)).
#[inline]
pub(crate) fn ln_miss_prob(d: f64, params: &ModelParams) -> f64 {
    norm::ln_cdf((params.threshold - expected_strength(d, params)) / params.sigma_s)
}

/// Log-density of an observed strength `y >= threshold` at distance `d`:
/// the N(beta0 - beta1 d, sigma_s²) density truncated below at the threshold.
pub fn logpdf_strength_given_detected(y: f64, d: f64, params: &ModelParams) -> Result<f64> {
    if y < params.threshold {
        return Err(Error::StrengthContradictsDetection {
            strength: y,
            threshold: params.threshold,
        });
    }
    Ok(logpdf_strength_unchecked(y, d, params))
}

#[inline]
pub(crate) fn logpdf_strength_unchecked(y: f64, d: f64, params: &ModelParams) -> f64 {
    let z = (y - expected_strength(d, params)) / params.sigma_s;
    norm::ln_pdf(z) - params.sigma_s.ln() - ln_detect_prob(d, params)
}

/// Log-density of an arrival time `t` for a call emitted at time `e` at
/// distance `d`: N(e + d/v, sigma_t²).
pub fn logpdf_arrival_time(
    t: f64,
    d: f64,
    e: f64,
    params: &ModelParams,
    sound_speed: f64,
) -> f64 {
    let z = (t - e - d / sound_speed) / params.sigma_t;
    norm::ln_pdf(z) - params.sigma_t.ln()
}

/// Probability that a call at `x` is detected by at least `min_detectors`
/// detectors.
pub fn overall_detect_prob(
    x: Point,
    config: &SurveyConfig,
    params: &ModelParams,
    min_detectors: MinDetectors,
) -> f64 {
    let mut miss_all = 1.0;
    let mut exactly_one = 0.0;
    for m in 0..config.n_detectors() {
        let g = detect_prob_unchecked(config.distance(m, x), params);
        // Running sum over i of g_i * prod_{j != i} (1 - g_j).
        exactly_one = exactly_one * (1.0 - g) + g * miss_all;
        miss_all *= 1.0 - g;
    }
    let p1 = 1.0 - miss_all;
    match min_detectors {
        MinDetectors::One => p1.clamp(0.0, 1.0),
        MinDetectors::Two => (p1 - exactly_one).clamp(0.0, 1.0),
    }
}

/// Grid quadrature of `overall_detect_prob` over the region, divided by the
/// region area: the mean detection probability.
pub fn mean_detect_prob(
    config: &SurveyConfig,
    params: &ModelParams,
    min_detectors: MinDetectors,
) -> Result<f64> {
    let grid = config.region.grid();
    if grid.cells.is_empty() {
        return Err(Error::InvalidConfig("integration grid is empty".into()));
    }
    let sum: f64 = grid
        .cells
        .iter()
        .map(|&x| overall_detect_prob(x, config, params, min_detectors))
        .sum();
    Ok(sum / grid.cells.len() as f64)
}

/// ∫_A p.(x) dx over the grid (mean times the grid-covered area).
pub fn integrated_detect_prob(
    config: &SurveyConfig,
    params: &ModelParams,
    min_detectors: MinDetectors,
) -> f64 {
    let grid = config.region.grid();
    let sum: f64 = grid
        .cells
        .iter()
        .map(|&x| overall_detect_prob(x, config, params, min_detectors))
        .sum();
    sum * grid.cell_area
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::SurveyRegion;
    use crate::survey::Detector;

    fn params() -> ModelParams {
        ModelParams { beta0: 150.0, beta1: 3.0, sigma_s: 10.0, sigma_t: 0.01, threshold: 130.0 }
    }

    /// Independent route for g(d): Simpson quadrature of the strength density
    /// above the threshold.
    fn detect_prob_by_quadrature(d: f64, p: &ModelParams) -> f64 {
        let mu = p.beta0 - p.beta1 * d;
        let lo = p.threshold;
        let hi = mu + 12.0 * p.sigma_s;
        if hi <= lo {
            // Mass above threshold is a far upper tail; integrate what little
            // is there over [lo, lo + 12 sigma].
            return simpson(lo, lo + 12.0 * p.sigma_s, 20_001, |y| {
                norm::pdf((y - mu) / p.sigma_s) / p.sigma_s
            });
        }
        simpson(lo, hi, 20_001, |y| norm::pdf((y - mu) / p.sigma_s) / p.sigma_s)
    }

    fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        assert!(n % 2 == 1);
        let h = (b - a) / (n - 1) as f64;
        let mut s = f(a) + f(b);
        for i in 1..n - 1 {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn detect_prob_at_zero_distance() {
        let p = params();
        let g = detect_prob(0.0, &p).unwrap();
        assert!((g - 0.977_249_868_051_820_8).abs() < 1e-9);
        // Oracle: numerical integration of the strength density over [c, inf).
        assert!((g - detect_prob_by_quadrature(0.0, &p)).abs() < 1e-8);
    }

    #[test]
    fn detect_prob_half_at_threshold_mean() {
        let p = params();
        let d = 20.0 / 3.0; // beta0 - beta1 d = threshold
        assert!((detect_prob(d, &p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn detect_prob_far_tail() {
        let p = params();
        // beta0 - beta1 d = c - 5 sigma_s  =>  d = (20 + 50)/3
        let d = 70.0 / 3.0;
        let g = detect_prob(d, &p).unwrap();
        assert!(g <= 3e-7, "g = {g}");
        assert!(g > 0.0);
    }

    #[test]
    fn detect_prob_monotone_and_bounded() {
        let p = params();
        let mut prev = f64::INFINITY;
        for i in 0..1000 {
            let d = i as f64 * 0.1;
            let g = detect_prob(d, &p).unwrap();
            assert!((0.0..=1.0).contains(&g));
            assert!(g <= prev + 1e-15);
            prev = g;
        }
    }

    #[test]
    fn detect_prob_rejects_bad_input() {
        let p = params();
        assert!(detect_prob(f64::NAN, &p).is_err());
        assert!(detect_prob(-1.0, &p).is_err());
    }

    #[test]
    fn expected_strength_cases() {
        let p = params();
        assert_eq!(expected_strength(0.0, &p), 150.0);
        assert_eq!(expected_strength(10.0, &p), 120.0);
        let flat = ModelParams { beta1: 0.0, ..p };
        assert_eq!(expected_strength(123.0, &flat), 150.0);
    }

    #[test]
    fn strength_logpdf_at_mean() {
        let p = params();
        // Pick d so the mean sits above the threshold.
        let d = 3.0;
        let mu = expected_strength(d, &p);
        let lp = logpdf_strength_given_detected(mu, d, &p).unwrap();
        let expect = (norm::pdf(0.0) / p.sigma_s).ln() - detect_prob(d, &p).unwrap().ln();
        assert!((lp - expect).abs() < 1e-12);
    }

    #[test]
    fn strength_logpdf_normalizes() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = ModelParams {
                beta0: rng.random_range(120.0..160.0),
                beta1: rng.random_range(0.0..5.0),
                sigma_s: rng.random_range(2.0..15.0),
                sigma_t: 0.01,
                threshold: rng.random_range(100.0..140.0),
            };
            let d = rng.random_range(0.0..15.0);
            let mu = expected_strength(d, &p);
            let hi = mu.max(p.threshold) + 14.0 * p.sigma_s;
            let integral = simpson(p.threshold, hi, 40_001, |y| {
                logpdf_strength_given_detected(y, d, &p).unwrap().exp()
            });
            assert!((integral - 1.0).abs() < 1e-6, "integral = {integral}");
        }
    }

    #[test]
    fn strength_below_threshold_is_error() {
        let p = params();
        assert!(logpdf_strength_given_detected(129.9, 0.0, &p).is_err());
    }

    #[test]
    fn arrival_time_density() {
        let p = params();
        // At the mean: density 1/(sigma_t sqrt(2 pi)).
        let at_mean = logpdf_arrival_time(2.0, 330.0, 1.0, &p, 330.0);
        assert!((at_mean - (1.0 / (p.sigma_t * (2.0 * std::f64::consts::PI).sqrt())).ln()).abs() < 1e-12);
        // Symmetry about the mean.
        let d = 12.0;
        let mu = 0.7 + d / 330.0;
        let a = logpdf_arrival_time(mu + 0.003, d, 0.7, &p, 330.0);
        let b = logpdf_arrival_time(mu - 0.003, d, 0.7, &p, 330.0);
        assert!((a - b).abs() < 1e-12);
    }

    fn two_detector_config(gs: Point) -> SurveyConfig {
        let region = SurveyRegion::rectangle(-50.0, -50.0, 50.0, 50.0, 64).unwrap();
        let dets = vec![
            Detector { id: 1, position: Point::new(-gs.x, 0.0) },
            Detector { id: 2, position: Point::new(gs.x, 0.0) },
        ];
        SurveyConfig::new(region, dets, 25.0, 330.0).unwrap()
    }

    #[test]
    fn overall_detect_prob_two_detectors() {
        // Construct parameters so both detectors see g = 0.5 at the origin.
        let cfg = two_detector_config(Point::new(5.0, 0.0));
        let p = ModelParams {
            beta0: 130.0 + 3.0 * 5.0,
            beta1: 3.0,
            sigma_s: 10.0,
            sigma_t: 0.01,
            threshold: 130.0,
        };
        let origin = Point::new(0.0, 0.0);
        let p1 = overall_detect_prob(origin, &cfg, &p, MinDetectors::One);
        let p2 = overall_detect_prob(origin, &cfg, &p, MinDetectors::Two);
        assert!((p1 - 0.75).abs() < 1e-12);
        assert!((p2 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn overall_detect_prob_three_detectors_brute_force() {
        // Three detectors with g = 0.9 each at the test point: brute-force sum
        // over all 2^3 outcomes with at least two successes.
        let region = SurveyRegion::rectangle(-50.0, -50.0, 50.0, 50.0, 64).unwrap();
        let r = 4.0;
        let dets = vec![
            Detector { id: 1, position: Point::new(r, 0.0) },
            Detector { id: 2, position: Point::new(-r, 0.0) },
            Detector { id: 3, position: Point::new(0.0, r) },
        ];
        let cfg = SurveyConfig::new(region, dets, 25.0, 330.0).unwrap();
        // Solve for beta0 so g(r) = 0.9: (c - mu)/sigma = qnorm(0.1).
        let sigma_s = 10.0;
        let beta1 = 3.0;
        let c = 130.0;
        let beta0 = c - sigma_s * norm::quantile(0.1) + beta1 * r;
        let p = ModelParams { beta0, beta1, sigma_s, sigma_t: 0.01, threshold: c };
        let x = Point::new(0.0, 0.0);
        let got = overall_detect_prob(x, &cfg, &p, MinDetectors::Two);
        let mut brute = 0.0;
        for mask in 0u32..8 {
            if mask.count_ones() >= 2 {
                let mut term = 1.0;
                for m in 0..3 {
                    let g = detect_prob_unchecked(cfg.distance(m, x), &p);
                    term *= if mask & (1 << m) != 0 { g } else { 1.0 - g };
                }
                brute += term;
            }
        }
        assert!((got - brute).abs() < 1e-12);
        assert!((got - 0.972).abs() < 1e-9);
    }

    #[test]
    fn mean_detect_prob_limits() {
        let cfg = two_detector_config(Point::new(5.0, 0.0));
        let sure = ModelParams {
            beta0: 1.0e4,
            beta1: 0.0,
            sigma_s: 1.0,
            sigma_t: 0.01,
            threshold: 130.0,
        };
        assert!((mean_detect_prob(&cfg, &sure, MinDetectors::One).unwrap() - 1.0).abs() < 1e-12);
        let never = ModelParams { beta0: -1.0e4, ..sure };
        assert!(mean_detect_prob(&cfg, &never, MinDetectors::One).unwrap() < 1e-12);
    }

    #[test]
    fn mean_detect_prob_grid_refinement() {
        let p = params();
        let region = SurveyRegion::rectangle(-40.0, -40.0, 40.0, 40.0, 64).unwrap();
        let dets = vec![
            Detector { id: 1, position: Point::new(-6.0, 0.0) },
            Detector { id: 2, position: Point::new(6.0, 0.0) },
        ];
        let cfg = SurveyConfig::new(region, dets, 25.0, 330.0).unwrap();
        let coarse = {
            let r32 = cfg.region.with_resolution(32).unwrap();
            let mut c = cfg.clone();
            c.region = r32;
            mean_detect_prob(&c, &p, MinDetectors::One).unwrap()
        };
        let fine = mean_detect_prob(&cfg, &p, MinDetectors::One).unwrap();
        assert!((coarse - fine).abs() < 1e-3, "coarse {coarse} vs fine {fine}");
    }
}
