use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("cannot condition on null event")]
    NullEvent,

    #[error("invalid Schmidt coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("message ({j}, {k}) out of range for rank {rank} and d2 = {d2}")]
    MessageOutOfRange { j: usize, k: usize, rank: usize, d2: usize },

    #[error("index {index} out of range (< {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("input is not a valid encoded state")]
    NotEncodedState,

    #[error("separation parameter {0} outside [0, 1]")]
    InvalidXi(f64),

    #[error("failure branch is empty")]
    EmptyFailureBranch,

    #[error("unreachable outcome")]
    UnreachableOutcome,

    #[error("plan exceeds channel stages: {stages} stages requested, at most {max} possible")]
    PlanTooDeep { stages: usize, max: usize },

    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
