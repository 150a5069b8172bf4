//! Observed detection data: per-detector time-ordered detections with their
//! signal strengths. This is everything the estimator sees — which detections
//! are of the same call is never part of the input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survey::SurveyConfig;

/// One detection as it appears in input files.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Detection {
    pub detector_id: u32,
    pub time: f64,
    pub signal_strength: f64,
}

/// Validated per-detector detection lists, sorted ascending by time. Exact
/// time ties within a detector are perturbed by +1e-9 s increments on
/// ingestion so the arrival order is strict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionData {
    per_detector: Vec<Vec<(f64, f64)>>,
}

const TIE_PERTURBATION: f64 = 1e-9;

impl DetectionData {
    pub fn from_detections(
        config: &SurveyConfig,
        threshold: f64,
        detections: &[Detection],
    ) -> Result<Self> {
        let m = config.n_detectors();
        let mut per_detector: Vec<Vec<(f64, f64)>> = vec![Vec::new(); m];
        for (index, det) in detections.iter().enumerate() {
            if !det.time.is_finite() || !det.signal_strength.is_finite() {
                return Err(Error::NonFiniteDetection { index });
            }
            if det.detector_id < 1 || det.detector_id as usize > m {
                return Err(Error::UnknownDetector { index, id: det.detector_id });
            }
            if det.time < 0.0 || det.time > config.duration {
                return Err(Error::TimeOutOfRange {
                    index,
                    time: det.time,
                    duration: config.duration,
                });
            }
            if det.signal_strength < threshold {
                return Err(Error::StrengthBelowThreshold {
                    index,
                    strength: det.signal_strength,
                    threshold,
                });
            }
            per_detector[(det.detector_id - 1) as usize].push((det.time, det.signal_strength));
        }
        for list in &mut per_detector {
            list.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for j in 1..list.len() {
                if list[j].0 <= list[j - 1].0 {
                    list[j].0 = list[j - 1].0 + TIE_PERTURBATION;
                }
            }
        }
        Ok(DetectionData { per_detector })
    }

    /// Internal constructor for already-grouped data (partition output,
    /// simulator output). Lists must be sorted by time.
    pub(crate) fn from_parts(per_detector: Vec<Vec<(f64, f64)>>) -> Self {
        debug_assert!(per_detector
            .iter()
            .all(|l| l.windows(2).all(|w| w[0].0 < w[1].0)));
        DetectionData { per_detector }
    }

    pub fn n_detectors(&self) -> usize {
        self.per_detector.len()
    }

    /// Detection counts per detector (the J vector).
    pub fn counts(&self) -> Vec<usize> {
        self.per_detector.iter().map(|l| l.len()).collect()
    }

    pub fn total(&self) -> usize {
        self.per_detector.iter().map(|l| l.len()).sum()
    }

    pub fn detector(&self, m: usize) -> &[(f64, f64)] {
        &self.per_detector[m]
    }

    pub fn time(&self, m: usize, j: usize) -> f64 {
        self.per_detector[m][j].0
    }

    pub fn strength(&self, m: usize, j: usize) -> f64 {
        self.per_detector[m][j].1
    }

    /// Flatten back into input-style records (detector ids are 1-based).
    pub fn to_detections(&self) -> Vec<Detection> {
        let mut out = Vec::with_capacity(self.total());
        for (m, list) in self.per_detector.iter().enumerate() {
            for &(time, signal_strength) in list {
                out.push(Detection { detector_id: (m + 1) as u32, time, signal_strength });
            }
        }
        out
    }
}
