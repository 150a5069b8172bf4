use thiserror::Error;

/// Errors produced by survey construction, data ingestion, and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid survey configuration: {0}")]
    InvalidConfig(String),

    #[error("integration grid covers {covered:.4} m² but the region area is {area:.4} m²; increase the grid resolution")]
    GridAreaMismatch { covered: f64, area: f64 },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("detection {index} references unknown detector id {id}")]
    UnknownDetector { index: usize, id: u32 },

    #[error("detection {index} has time {time} outside the survey window [0, {duration}]")]
    TimeOutOfRange { index: usize, time: f64, duration: f64 },

    #[error("detection {index} has signal strength {strength} below the detection threshold {threshold}")]
    StrengthBelowThreshold { index: usize, strength: f64, threshold: f64 },

    #[error("detection {index} has a non-finite field")]
    NonFiniteDetection { index: usize },

    #[error("latent state is inconsistent: {0}")]
    InvalidLatentState(String),

    #[error("signal strength {strength} below threshold {threshold} contradicts a detection")]
    StrengthContradictsDetection { strength: f64, threshold: f64 },

    #[error("call {call} has {got} detections but at least {need} are required")]
    TooFewDetections { call: usize, got: usize, need: usize },

    #[error("total call count {n} is below the number of observed calls {n_obs}")]
    CallCountBelowObserved { n: usize, n_obs: usize },

    #[error("mean detection probability is zero; no call in the region is detectable")]
    ZeroDetectionProbability,

    #[error("objective is not finite at the initial parameters")]
    NonFiniteObjective,

    #[error("{0}")]
    InvalidInput(String),

    #[error("{failed} of {total} bootstrap replicates failed (more than 20%)")]
    TooManyBootstrapFailures { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
