use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

/// Errors shared by the simulation, estimation and configuration layers.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("jump rate {rate} exceeds the declared bound {bound}")]
    RateBoundExceeded { rate: f64, bound: f64 },
    #[error("rejection sampling budget exhausted after {attempts} attempts")]
    RejectionBudget { attempts: usize },
    #[error("suspected Zeno behaviour: {jumps} jumps by t = {time}")]
    ZenoSuspected { jumps: usize, time: f64 },
    #[error("unknown agent id {0}")]
    UnknownAgent(usize),
    #[error("guard not positive after resample")]
    GuardNotPositive,
    #[error("survival probability {survival} below floor {floor}; hazard unreliable there")]
    SurvivalTooSmall { survival: f64, floor: f64 },
    #[error("non-monotone clock for agent {agent} at sample {index}")]
    CorruptClock { agent: usize, index: usize },
    #[error("rate estimate not valid at clock value {tau} for agent {agent}")]
    RateUnavailable { agent: usize, tau: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("parse error: {0}")]
    Parse(String),
}
