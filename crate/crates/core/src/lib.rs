//! Call-density estimation from synchronized acoustic detector arrays when it
//! is unknown which detections on different detectors are of the same call.
//!
//! The estimator alternates a Monte Carlo E-step — Metropolis-Hastings
//! sampling of latent capture histories, call locations, and emission times —
//! with an M-step that maximizes the conditional (or semi-complete-data)
//! likelihood of the sampled states. Detections are first split into
//! independent groups by sound-travel-time feasibility; confidence intervals
//! come from a warm-started parametric bootstrap.

pub mod bootstrap;
pub mod data;
pub mod detect;
pub mod error;
pub mod estep;
pub mod exec;
pub mod geom;
pub mod latent;
pub mod likelihood;
pub mod mcem;
pub mod mstep;
pub mod norm;
pub mod optim;
pub mod params;
pub mod partition;
pub mod rng;
pub mod simulate;
pub mod study;
pub mod survey;
#[cfg(test)]
pub(crate) mod testing;
pub mod truncnorm;

pub use data::{Detection, DetectionData};
pub use error::{Error, Result};
pub use geom::{Point, SurveyRegion};
pub use params::{DensityEstimate, MinDetectors, ModelParams};
pub use survey::{Detector, SurveyConfig};
