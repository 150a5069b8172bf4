//! Latent capture histories.
//!
//! A `LatentState` holds a fixed roster of candidate calls for one detection
//! group. Every observed detection is explained by exactly one candidate; a
//! candidate explaining no detection is an undetected call whose location and
//! emission time still evolve under their priors. The assignment of a
//! detector's time-ordered detections to its detected candidates (the
//! detection order) must match the order of predicted arrival times
//! `e + d/v`; states violating that order have zero likelihood.

use serde::{Deserialize, Serialize};

use crate::data::DetectionData;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::survey::SurveyConfig;

/// One candidate call: location, emission time, and for each detector either
/// "not detected" or the index of the detection it explains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCall {
    pub x: Point,
    pub e: f64,
    pub assigned: Vec<Option<usize>>,
}

impl CandidateCall {
    pub fn undetected(x: Point, e: f64, n_detectors: usize) -> Self {
        CandidateCall { x, e, assigned: vec![None; n_detectors] }
    }

    /// Number of detectors that detect this call.
    pub fn n_detections(&self) -> usize {
        self.assigned.iter().filter(|a| a.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    calls: Vec<CandidateCall>,
    n_detectors: usize,
}

impl LatentState {
    pub fn new(calls: Vec<CandidateCall>, n_detectors: usize) -> Self {
        debug_assert!(calls.iter().all(|c| c.assigned.len() == n_detectors));
        LatentState { calls, n_detectors }
    }

    pub fn n_candidates(&self) -> usize {
        self.calls.len()
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn calls(&self) -> &[CandidateCall] {
        &self.calls
    }

    pub fn call(&self, n: usize) -> &CandidateCall {
        &self.calls[n]
    }

    pub fn call_mut(&mut self, n: usize) -> &mut CandidateCall {
        &mut self.calls[n]
    }

    /// Capture indicator z_{m,n}.
    pub fn z(&self, m: usize, n: usize) -> bool {
        self.calls[n].assigned[m].is_some()
    }

    /// Number of calls detected by at least `min` detectors.
    pub fn n_observed(&self, min: usize) -> usize {
        self.calls.iter().filter(|c| c.n_detections() >= min).count()
    }

    /// Candidates detected by detector `m`, as (call index, detection index).
    pub fn detected_by(&self, m: usize) -> Vec<(usize, usize)> {
        self.calls
            .iter()
            .enumerate()
            .filter_map(|(n, c)| c.assigned[m].map(|j| (n, j)))
            .collect()
    }

    /// Check the partition invariants against the data: every detection is
    /// explained exactly once and indices are in range.
    pub fn validate(&self, data: &DetectionData) -> Result<()> {
        if data.n_detectors() != self.n_detectors {
            return Err(Error::InvalidLatentState("detector count mismatch".into()));
        }
        for m in 0..self.n_detectors {
            let j_m = data.detector(m).len();
            let mut seen = vec![false; j_m];
            for (n, call) in self.calls.iter().enumerate() {
                if let Some(j) = call.assigned[m] {
                    if j >= j_m {
                        return Err(Error::InvalidLatentState(format!(
                            "call {n} explains detection {j} of detector {m} which has only {j_m}"
                        )));
                    }
                    if seen[j] {
                        return Err(Error::InvalidLatentState(format!(
                            "detection {j} of detector {m} is explained twice"
                        )));
                    }
                    seen[j] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::InvalidLatentState(format!(
                    "detector {m} has unexplained detections"
                )));
            }
        }
        Ok(())
    }

    /// Strip the assignments of calls with fewer than `min` detections,
    /// turning them into undetected candidates. Used when the estimation
    /// objective only admits calls seen by at least two detectors.
    pub fn drop_below(&self, min: usize) -> LatentState {
        let mut out = self.clone();
        for call in &mut out.calls {
            if call.n_detections() < min {
                call.assigned.iter_mut().for_each(|a| *a = None);
            }
        }
        out
    }

    /// True when, on every detector, the assignment of detections to calls
    /// matches the rank order of predicted arrival times.
    pub fn order_consistent(&self, config: &SurveyConfig) -> bool {
        (0..self.n_detectors).all(|m| self.order_consistent_at(config, m))
    }

    pub fn order_consistent_at(&self, config: &SurveyConfig, m: usize) -> bool {
        let detected = self.detected_by(m);
        if detected.len() < 2 {
            return true;
        }
        let derived = derive_order(&self.calls, config, m);
        let mut by_slot: Vec<(usize, usize)> = detected;
        by_slot.sort_by_key(|&(_, j)| j);
        by_slot.iter().map(|&(n, _)| n).eq(derived)
    }

    /// Pad the observed strengths and times into call-indexed matrices with
    /// `None` exactly where z = 0. Row m read over detected calls in arrival
    /// order recovers the raw detection vectors.
    #[allow(clippy::type_complexity)]
    pub fn pad(&self, data: &DetectionData) -> (Vec<Vec<Option<f64>>>, Vec<Vec<Option<f64>>>) {
        let n = self.n_candidates();
        let mut strengths = vec![vec![None; n]; self.n_detectors];
        let mut times = vec![vec![None; n]; self.n_detectors];
        for (idx, call) in self.calls.iter().enumerate() {
            for m in 0..self.n_detectors {
                if let Some(j) = call.assigned[m] {
                    strengths[m][idx] = Some(data.strength(m, j));
                    times[m][idx] = Some(data.time(m, j));
                }
            }
        }
        (strengths, times)
    }
}

/// Detection order for detector `m`: the calls it detects, sorted by
/// predicted arrival time `e + d_m(x)/v` (ties broken by call index). The
/// k-th element is the call explaining the k-th time-ordered detection.
pub fn derive_order(calls: &[CandidateCall], config: &SurveyConfig, m: usize) -> Vec<usize> {
    let mut detected: Vec<(f64, usize)> = calls
        .iter()
        .enumerate()
        .filter(|(_, c)| c.assigned[m].is_some())
        .map(|(n, c)| (c.e + config.travel_time(m, c.x), n))
        .collect();
    detected.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    detected.into_iter().map(|(_, n)| n).collect()
}

/// Reassign detector `m`'s detection indices so the assignment matches the
/// predicted arrival order (keeps z fixed, rewrites the order).
pub fn realign_order(calls: &mut [CandidateCall], config: &SurveyConfig, m: usize) {
    let order = derive_order(calls, config, m);
    for (slot, n) in order.into_iter().enumerate() {
        calls[n].assigned[m] = Some(slot);
    }
}
