//! Exact log-likelihood evaluators.
//!
//! Three forms are provided: the complete-data likelihood over all candidate
//! calls (the sampling target of the E-step), the conditional likelihood over
//! observed calls given their number (the default M-step objective), and the
//! semi-complete-data likelihood in which undetected-call variables are
//! integrated out and the total call count enters as a parameter.
//!
//! These are reference implementations; the optimizer evaluates an
//! algebraically identical cached form (see `mstep`). Permutation constants
//! that depend on neither the parameters nor the matching are dropped here
//! and everywhere.

use statrs::function::gamma::ln_gamma;

use crate::data::DetectionData;
use crate::detect;
use crate::error::{Error, Result};
use crate::latent::LatentState;
use crate::params::{MinDetectors, ModelParams};
use crate::survey::SurveyConfig;

/// Sum over candidate calls of the log uniform location density, -inf if any
/// call sits outside the region.
pub fn loglik_location_prior(latent: &LatentState, config: &SurveyConfig) -> f64 {
    let ln_inv_area = -config.region.area().ln();
    let mut total = 0.0;
    for call in latent.calls() {
        if !config.region.contains(call.x) {
            return f64::NEG_INFINITY;
        }
        total += ln_inv_area;
    }
    total
}

/// Sum over candidate calls of the log uniform emission-time density.
pub fn loglik_emission_prior(latent: &LatentState, config: &SurveyConfig) -> f64 {
    let (lo, hi) = config.emission_window;
    let ln_inv_window = -(hi - lo).ln();
    let mut total = 0.0;
    for call in latent.calls() {
        if call.e < lo || call.e > hi {
            return f64::NEG_INFINITY;
        }
        total += ln_inv_window;
    }
    total
}

/// Bernoulli capture terms over every (detector, candidate) pair.
pub fn loglik_capture(latent: &LatentState, config: &SurveyConfig, params: &ModelParams) -> f64 {
    let mut total = 0.0;
    for call in latent.calls() {
        for m in 0..config.n_detectors() {
            let d = config.distance(m, call.x);
            total += if call.assigned[m].is_some() {
                detect::ln_detect_prob(d, params)
            } else {
                detect::ln_miss_prob(d, params)
            };
        }
    }
    total
}

/// Truncated-normal strength terms for every detected entry.
pub fn loglik_strength(
    latent: &LatentState,
    data: &DetectionData,
    config: &SurveyConfig,
    params: &ModelParams,
) -> f64 {
    let mut total = 0.0;
    for call in latent.calls() {
        for m in 0..config.n_detectors() {
            if let Some(j) = call.assigned[m] {
                let d = config.distance(m, call.x);
                total += detect::logpdf_strength_unchecked(data.strength(m, j), d, params);
            }
        }
    }
    total
}

/// Gaussian arrival-time terms for every detected entry.
pub fn loglik_times(
    latent: &LatentState,
    data: &DetectionData,
    config: &SurveyConfig,
    params: &ModelParams,
) -> f64 {
    let mut total = 0.0;
    for call in latent.calls() {
        for m in 0..config.n_detectors() {
            if let Some(j) = call.assigned[m] {
                let d = config.distance(m, call.x);
                total += detect::logpdf_arrival_time(
                    data.time(m, j),
                    d,
                    call.e,
                    params,
                    config.sound_speed,
                );
            }
        }
    }
    total
}

/// Complete-data log-likelihood of one group's latent state. Returns -inf
/// (never an error) for states with zero density: a call outside the region,
/// an emission time outside the window, or a detection order inconsistent
/// with predicted arrival times.
pub fn complete_data_loglik(
    latent: &LatentState,
    data: &DetectionData,
    config: &SurveyConfig,
    params: &ModelParams,
) -> f64 {
    if !latent.order_consistent(config) {
        return f64::NEG_INFINITY;
    }
    let location = loglik_location_prior(latent, config);
    if location == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let emission = loglik_emission_prior(latent, config);
    if emission == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    location
        + emission
        + loglik_capture(latent, config, params)
        + loglik_strength(latent, data, config, params)
        + loglik_times(latent, data, config, params)
}

/// Conditional log-likelihood over the observed calls, given their number.
///
/// Calls detected by fewer than `min_detectors` detectors but at least once
/// are an error; undetected candidates are skipped. The per-call location
/// density p.(x)/∫p. and the capture normalization 1/p.(x) cancel, which this
/// implementation exploits: each included call contributes its raw capture,
/// strength, time, and emission-prior terms minus log ∫_A p.(x) dx.
pub fn conditional_loglik(
    latent: &LatentState,
    data: &DetectionData,
    config: &SurveyConfig,
    params: &ModelParams,
    min_detectors: MinDetectors,
) -> Result<f64> {
    let min = min_detectors.count();
    let ln_integral = detect::integrated_detect_prob(config, params, min_detectors).ln();
    let (lo, hi) = config.emission_window;
    let ln_inv_window = -(hi - lo).ln();
    let mut total = 0.0;
    for (n, call) in latent.calls().iter().enumerate() {
        let k = call.n_detections();
        if k == 0 {
            continue;
        }
        if k < min {
            return Err(Error::TooFewDetections { call: n, got: k, need: min });
        }
        if !config.region.contains(call.x) || call.e < lo || call.e > hi {
            return Ok(f64::NEG_INFINITY);
        }
        total += ln_inv_window - ln_integral;
        for m in 0..config.n_detectors() {
            let d = config.distance(m, call.x);
            match call.assigned[m] {
                Some(j) => {
                    total += detect::ln_detect_prob(d, params)
                        + detect::logpdf_strength_unchecked(data.strength(m, j), d, params)
                        + detect::logpdf_arrival_time(
                            data.time(m, j),
                            d,
                            call.e,
                            params,
                            config.sound_speed,
                        );
                }
                None => total += detect::ln_miss_prob(d, params),
            }
        }
    }
    Ok(total)
}

/// Semi-complete-data log-likelihood with the total call count `n_total` as a
/// parameter: observed-call terms as in the complete-data form plus the
/// combinatorial count term and the escape probability of the
/// `n_total - n_observed` undetected calls.
pub fn semi_complete_loglik(
    latent: &LatentState,
    data: &DetectionData,
    config: &SurveyConfig,
    params: &ModelParams,
    n_total: usize,
) -> Result<f64> {
    let n_obs = latent.n_observed(1);
    if n_total < n_obs {
        return Err(Error::CallCountBelowObserved { n: n_total, n_obs });
    }
    let n_unobs = n_total - n_obs;
    let area = config.region.area();
    let (lo, hi) = config.emission_window;
    let ln_inv_window = -(hi - lo).ln();

    let mut total = ln_gamma(n_total as f64 + 1.0) - ln_gamma(n_unobs as f64 + 1.0);
    if n_unobs > 0 {
        let escape = 1.0 - detect::integrated_detect_prob(config, params, MinDetectors::One) / area;
        if escape <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += n_unobs as f64 * escape.ln();
    }
    for call in latent.calls() {
        if call.n_detections() == 0 {
            continue;
        }
        if !config.region.contains(call.x) || call.e < lo || call.e > hi {
            return Ok(f64::NEG_INFINITY);
        }
        total += ln_inv_window - area.ln();
        for m in 0..config.n_detectors() {
            let d = config.distance(m, call.x);
            match call.assigned[m] {
                Some(j) => {
                    total += detect::ln_detect_prob(d, params)
                        + detect::logpdf_strength_unchecked(data.strength(m, j), d, params)
                        + detect::logpdf_arrival_time(
                            data.time(m, j),
                            d,
                            call.e,
                            params,
                            config.sound_speed,
                        );
                }
                None => total += detect::ln_miss_prob(d, params),
            }
        }
    }
    Ok(total)
}
