use thiserror::Error;

/// Failures raised by the physics pipeline.
///
/// Every variant is a typed marker so sweeps can record which cells failed
/// and why instead of leaving silent gaps.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("squared effective frequency {radicand:e} is not positive (optical anti-spring)")]
    NonPositiveFrequency { radicand: f64 },

    #[error("value {value} outside domain: {reason}")]
    Domain { value: f64, reason: &'static str },

    #[error("steady-state filter does not exist: radicand {radicand:e} is negative")]
    ConditionalInstability { radicand: f64 },

    #[error("measurement rate is zero; the analytic conditional covariance is singular")]
    ZeroMeasurementRate,

    #[error("Riccati integration lost positivity at t = {time:e} (det = {det:e}); reduce the step")]
    StepSizeTooLarge { time: f64, det: f64 },

    #[error("drift matrix is not Hurwitz")]
    NotHurwitz,

    #[error("non-physical Gaussian state: {reason}")]
    NonPhysicalState { reason: String },

    #[error("covariance ellipse is degenerate; squeezing angle undefined")]
    DegenerateEllipse,

    #[error("joint process/measurement noise intensity is not positive semidefinite")]
    IllConditionedNoise,

    #[error("field never crosses level {level} in column {column}")]
    NoCrossing { column: usize, level: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag, used for failure markers in sweep output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::NonPositiveFrequency { .. } => "NonPositiveFrequency",
            Error::Domain { .. } => "DomainError",
            Error::ConditionalInstability { .. } => "ConditionalInstability",
            Error::ZeroMeasurementRate => "ZeroMeasurementRate",
            Error::StepSizeTooLarge { .. } => "StepSizeTooLarge",
            Error::NotHurwitz => "NotHurwitz",
            Error::NonPhysicalState { .. } => "NonPhysicalState",
            Error::DegenerateEllipse => "DegenerateEllipse",
            Error::IllConditionedNoise => "IllConditionedNoise",
            Error::NoCrossing { .. } => "NoCrossing",
        }
    }
}
