//! Model parameters and density estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the signal-strength detection model plus the arrival-time
/// scale. The detection threshold is part of the survey setup and is never
/// estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Source signal strength at distance zero.
    pub beta0: f64,
    /// Linear attenuation per metre.
    pub beta1: f64,
    /// Signal-strength standard deviation.
    pub sigma_s: f64,
    /// Arrival-time standard deviation in seconds.
    pub sigma_t: f64,
    /// Detection threshold: a sound is detected exactly when its received
    /// strength reaches this value.
    pub threshold: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta0.is_finite() && self.threshold.is_finite()) {
            return Err(Error::InvalidParams("beta0 and threshold must be finite".into()));
        }
        if !(self.beta1 >= 0.0 && self.beta1.is_finite()) {
            return Err(Error::InvalidParams(format!("beta1 = {} must be >= 0", self.beta1)));
        }
        if !(self.sigma_s > 0.0 && self.sigma_s.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma_s = {} must be > 0", self.sigma_s)));
        }
        if !(self.sigma_t > 0.0 && self.sigma_t.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma_t = {} must be > 0", self.sigma_t)));
        }
        Ok(())
    }
}

/// How many detectors must detect a call for it to count as observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MinDetectors {
    One,
    Two,
}

impl MinDetectors {
    pub fn count(self) -> usize {
        match self {
            MinDetectors::One => 1,
            MinDetectors::Two => 2,
        }
    }
}

impl std::fmt::Display for MinDetectors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.count())
    }
}

impl std::str::FromStr for MinDetectors {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "1" => Ok(MinDetectors::One),
            "2" => Ok(MinDetectors::Two),
            other => Err(format!("min_detectors must be 1 or 2, got `{other}`")),
        }
    }
}

/// Point estimates of call density and abundance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    /// Calls per second per square metre.
    pub d_c: f64,
    /// Estimated total number of calls over the survey.
    pub n_hat: f64,
    /// Mean detection probability over the region.
    pub p_bar: f64,
}
