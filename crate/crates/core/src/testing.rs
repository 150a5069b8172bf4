//! Shared fixtures for unit tests.

use crate::geom::{Point, SurveyRegion};
use crate::params::ModelParams;
use crate::survey::{Detector, SurveyConfig};

/// Six detectors in two rows over a 60 m square, 25 s recording.
pub(crate) fn six_detector_config() -> SurveyConfig {
    let region = SurveyRegion::rectangle(-30.0, -30.0, 30.0, 30.0, 64).unwrap();
    let dets = vec![
        Detector { id: 1, position: Point::new(-8.0, -5.0) },
        Detector { id: 2, position: Point::new(0.0, -5.5) },
        Detector { id: 3, position: Point::new(8.0, -5.0) },
        Detector { id: 4, position: Point::new(-8.0, 5.0) },
        Detector { id: 5, position: Point::new(0.0, 5.5) },
        Detector { id: 6, position: Point::new(8.0, 5.0) },
    ];
    SurveyConfig::new(region, dets, 25.0, 330.0).unwrap()
}

pub(crate) fn true_params() -> ModelParams {
    ModelParams { beta0: 150.0, beta1: 2.5, sigma_s: 8.0, sigma_t: 0.005, threshold: 134.0 }
}
