//! Survey layout: detector array, region, duration, sound speed, and the
//! window of admissible call emission times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, SurveyRegion};

pub const DEFAULT_SOUND_SPEED: f64 = 330.0;

/// A synchronized acoustic detector at a known position.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Detector {
    /// 1-based id as it appears in input files.
    pub id: u32,
    pub position: Point,
}

/// Static description of one survey.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurveyConfig {
    pub region: SurveyRegion,
    pub detectors: Vec<Detector>,
    /// Recording duration in seconds.
    pub duration: f64,
    /// Sound speed in m/s.
    pub sound_speed: f64,
    /// (left, right) bounds on call emission times. The left bound sits
    /// before the recording start so a call emitted just before time zero but
    /// arriving within the recording stays representable.
    pub emission_window: (f64, f64),
}

impl SurveyConfig {
    pub fn new(
        region: SurveyRegion,
        detectors: Vec<Detector>,
        duration: f64,
        sound_speed: f64,
    ) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidConfig("duration must be positive".into()));
        }
        if !(sound_speed.is_finite() && sound_speed > 0.0) {
            return Err(Error::InvalidConfig("sound speed must be positive".into()));
        }
        if detectors.is_empty() {
            return Err(Error::InvalidConfig("at least one detector is required".into()));
        }
        for d in &detectors {
            if !d.position.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "detector {} has a non-finite position",
                    d.id
                )));
            }
        }
        let mut ids: Vec<u32> = detectors.iter().map(|d| d.id).collect();
        ids.sort_unstable();
        for (k, id) in ids.iter().enumerate() {
            if *id != (k + 1) as u32 {
                return Err(Error::InvalidConfig(format!(
                    "detector ids must be unique and contiguous from 1; found {ids:?}"
                )));
            }
        }
        let mut config = SurveyConfig {
            region,
            detectors,
            duration,
            sound_speed,
            emission_window: (0.0, duration),
        };
        config.emission_window = (-config.max_travel_time(), duration);
        Ok(config)
    }

    pub fn with_emission_window(mut self, window: (f64, f64)) -> Result<Self> {
        if !(window.0.is_finite() && window.1.is_finite() && window.0 < window.1) {
            return Err(Error::InvalidConfig(format!(
                "emission window ({}, {}) is invalid",
                window.0, window.1
            )));
        }
        self.emission_window = window;
        Ok(self)
    }

    pub fn n_detectors(&self) -> usize {
        self.detectors.len()
    }

    /// Position of detector with 0-based index `m` (id m+1).
    pub fn position(&self, m: usize) -> Point {
        self.detectors[m].position
    }

    pub fn distance(&self, m: usize, x: Point) -> f64 {
        self.position(m).dist(x)
    }

    pub fn travel_time(&self, m: usize, x: Point) -> f64 {
        self.distance(m, x) / self.sound_speed
    }

    /// Longest sound travel time from anywhere in the region to any detector,
    /// bounded via the bounding-box corners.
    pub fn max_travel_time(&self) -> f64 {
        let (lo, hi) = self.region.bounding_box();
        let corners = [
            Point::new(lo.x, lo.y),
            Point::new(lo.x, hi.y),
            Point::new(hi.x, lo.y),
            Point::new(hi.x, hi.y),
        ];
        let mut dmax: f64 = 0.0;
        for d in &self.detectors {
            for c in &corners {
                dmax = dmax.max(d.position.dist(*c));
            }
        }
        dmax / self.sound_speed
    }

    pub fn emission_window_len(&self) -> f64 {
        self.emission_window.1 - self.emission_window.0
    }

    /// Median over detector pairs of the pairwise spacing; the location
    /// proposal scale defaults to half of this.
    pub fn median_detector_spacing(&self) -> f64 {
        let n = self.detectors.len();
        let mut d = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                d.push(self.detectors[i].position.dist(self.detectors[j].position));
            }
        }
        if d.is_empty() {
            return 1.0;
        }
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d[d.len() / 2]
    }

    /// Largest detector-to-detector distance.
    pub fn max_detector_spacing(&self) -> f64 {
        let n = self.detectors.len();
        let mut dmax: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                dmax = dmax.max(self.detectors[i].position.dist(self.detectors[j].position));
            }
        }
        dmax
    }
}
