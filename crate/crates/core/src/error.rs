use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid register: {0}")]
    InvalidRegister(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("time {t} lies outside the schedule window [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("negative duration {0} μs")]
    NegativeDuration(f64),

    #[error("blockade radius is undefined when both Rabi frequency and detuning vanish")]
    ZeroDrive,

    #[error("atoms {0} and {1} coincide")]
    CoincidentAtoms(usize, usize),

    #[error("{n} atoms exceeds the limit of {max}")]
    TooManyAtoms { n: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("norm drift {drift:e} exceeds tolerance {tolerance:e}")]
    NormDrift { drift: f64, tolerance: f64 },

    #[error("step halving moved a probability by {shift:e} (tolerance {tolerance:e})")]
    NotConverged { shift: f64, tolerance: f64 },

    #[error("shot count must be positive")]
    ZeroShots,

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("invalid bitstring {0:?}")]
    InvalidBitstring(String),

    #[error("readout error rate {0} outside [0, 1)")]
    InvalidEpsilon(f64),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("error bar at index {0} is not positive")]
    ZeroErrorBar(usize),

    #[error("degenerate fit design: {0}")]
    DegenerateDesign(String),

    #[error("fit did not converge from any starting point")]
    FitDidNotConverge,

    #[error("bitstring is not an independent set")]
    NotIndependent,

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
