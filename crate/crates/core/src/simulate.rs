//! Synthetic survey generation under the fitted model. Drives both the
//! bias/coverage studies and the parametric bootstrap.

use rand::Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DetectionData;
use crate::detect;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::latent::{CandidateCall, LatentState};
use crate::params::ModelParams;
use crate::survey::SurveyConfig;

/// Per-animal call rate: a fixed value or an empirical sample to resample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CallRateModel {
    Fixed(f64),
    Empirical(Vec<f64>),
}

impl CallRateModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            CallRateModel::Fixed(r) => *r > 0.0 && r.is_finite(),
            CallRateModel::Empirical(rs) => {
                !rs.is_empty() && rs.iter().all(|r| *r > 0.0 && r.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("call rates must be positive and finite".into()))
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            CallRateModel::Fixed(r) => *r,
            CallRateModel::Empirical(rs) => rs.iter().sum::<f64>() / rs.len() as f64,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            CallRateModel::Fixed(r) => *r,
            CallRateModel::Empirical(rs) => rs[rng.random_range(0..rs.len())],
        }
    }
}

/// How many calls an animal emits over the survey.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CallCountMode {
    /// Poisson with mean rate x duration.
    Poisson,
    /// Exactly round(rate x duration) calls, for reproducing designs that
    /// repeat each location a fixed number of times.
    Deterministic,
}

/// One simulated call with its full matching information.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrueCall {
    pub x: Point,
    pub e: f64,
    pub animal: Option<usize>,
    /// For each detector, the index of this call's detection in the stripped
    /// time-sorted data.
    pub assigned: Vec<Option<usize>>,
}

/// Ground truth retained alongside the stripped detection data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTruth {
    pub calls: Vec<TrueCall>,
    pub n_animals: Option<usize>,
    /// Arrivals discarded because they fell outside the recording window.
    pub boundary_dropped: usize,
}

impl SimTruth {
    pub fn n_calls(&self) -> usize {
        self.calls.len()
    }

    pub fn n_detected(&self, min: usize) -> usize {
        self.calls
            .iter()
            .filter(|c| c.assigned.iter().filter(|a| a.is_some()).count() >= min)
            .count()
    }

    /// The true latent state over the whole survey (one candidate per call).
    pub fn to_latent(&self, n_detectors: usize) -> LatentState {
        let calls = self
            .calls
            .iter()
            .map(|c| CandidateCall { x: c.x, e: c.e, assigned: c.assigned.clone() })
            .collect();
        LatentState::new(calls, n_detectors)
    }
}

struct RawCall {
    x: Point,
    e: f64,
    animal: Option<usize>,
}

fn poisson_draw<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive mean");
    rng.sample(dist) as usize
}

fn realize_detections<R: Rng + ?Sized>(
    raw: Vec<RawCall>,
    config: &SurveyConfig,
    params: &ModelParams,
    n_animals: Option<usize>,
    rng: &mut R,
) -> (DetectionData, SimTruth) {
    let m_total = config.n_detectors();
    // Per detector: (time, strength, call index); sorted later.
    let mut per_detector: Vec<Vec<(f64, f64, usize)>> = vec![Vec::new(); m_total];
    let mut boundary_dropped = 0usize;
    for (idx, call) in raw.iter().enumerate() {
        for (m, det) in per_detector.iter_mut().enumerate() {
            let d = config.distance(m, call.x);
            let y = detect::expected_strength(d, params)
                + params.sigma_s * rng.sample::<f64, _>(StandardNormal);
            if y < params.threshold {
                continue;
            }
            let t = call.e
                + d / config.sound_speed
                + params.sigma_t * rng.sample::<f64, _>(StandardNormal);
            if t < 0.0 || t > config.duration {
                boundary_dropped += 1;
                continue;
            }
            det.push((t, y, idx));
        }
    }
    let mut truth_calls: Vec<TrueCall> = raw
        .into_iter()
        .map(|c| TrueCall { x: c.x, e: c.e, animal: c.animal, assigned: vec![None; m_total] })
        .collect();
    let mut stripped: Vec<Vec<(f64, f64)>> = Vec::with_capacity(m_total);
    for (m, mut det) in per_detector.into_iter().enumerate() {
        det.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // Perturb exact ties the same way ingestion would.
        for j in 1..det.len() {
            if det[j].0 <= det[j - 1].0 {
                det[j].0 = det[j - 1].0 + 1e-9;
            }
        }
        let mut list = Vec::with_capacity(det.len());
        for (j, (t, y, call_idx)) in det.into_iter().enumerate() {
            truth_calls[call_idx].assigned[m] = Some(j);
            list.push((t, y));
        }
        stripped.push(list);
    }
    (
        DetectionData::from_parts(stripped),
        SimTruth { calls: truth_calls, n_animals, boundary_dropped },
    )
}

/// Simulate calls placed independently and uniformly at a given call density
/// (calls per second per square metre).
pub fn simulate_calls_only<R: Rng + ?Sized>(
    d_c: f64,
    config: &SurveyConfig,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(DetectionData, SimTruth)> {
    if !(d_c >= 0.0 && d_c.is_finite()) {
        return Err(Error::InvalidInput(format!("call density {d_c} must be >= 0")));
    }
    params.validate()?;
    let mean = d_c * config.region.area() * config.duration;
    let n = poisson_draw(rng, mean);
    let (lo, hi) = config.emission_window;
    let raw: Vec<RawCall> = (0..n)
        .map(|_| RawCall {
            x: config.region.sample_uniform(rng),
            e: rng.random_range(lo..hi),
            animal: None,
        })
        .collect();
    Ok(realize_detections(raw, config, params, None, rng))
}

/// Simulate animals at a given animal density, each emitting calls from its
/// location at a rate drawn from the call-rate model.
pub fn simulate_survey<R: Rng + ?Sized>(
    d_a: f64,
    call_rate: &CallRateModel,
    count_mode: CallCountMode,
    config: &SurveyConfig,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(DetectionData, SimTruth)> {
    if !(d_a >= 0.0 && d_a.is_finite()) {
        return Err(Error::InvalidInput(format!("animal density {d_a} must be >= 0")));
    }
    call_rate.validate()?;
    params.validate()?;
    let n_animals = poisson_draw(rng, d_a * config.region.area());
    let (lo, hi) = config.emission_window;
    let mut raw = Vec::new();
    for a in 0..n_animals {
        let x = config.region.sample_uniform(rng);
        let rate = call_rate.draw(rng);
        let n_calls = match count_mode {
            CallCountMode::Poisson => poisson_draw(rng, rate * config.duration),
            CallCountMode::Deterministic => (rate * config.duration).round() as usize,
        };
        for _ in 0..n_calls {
            raw.push(RawCall { x, e: rng.random_range(lo..hi), animal: Some(a) });
        }
    }
    Ok(realize_detections(raw, config, params, Some(n_animals), rng))
}

/// Verify a simulated truth against its stripped data (test support).
pub fn truth_consistent(truth: &SimTruth, data: &DetectionData) -> bool {
    let latent = truth.to_latent(data.n_detectors());
    latent.validate(data).is_ok()
}
