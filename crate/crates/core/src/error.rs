use alloc::string::String;

/// Errors raised by the classification pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid activity label: {0}")]
    InvalidLabel(String),
    #[error("decreasing timestamp at record {index}")]
    DecreasingTimestamp { index: usize },
    #[error("invalid record {index}: {reason}")]
    InvalidRecord { index: usize, reason: &'static str },
    #[error("window size must be positive and finite, got {0}")]
    InvalidWindow(f64),
    #[error("records of a segmented stream must share one label")]
    MixedLabels,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("class {label} has {count} samples, at least 2 are required")]
    TooFewSamples { label: String, count: usize },
    #[error("training requires labeled feature vectors")]
    MissingLabel,
    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Diverged { epoch: usize, batch: usize },
    #[error("non-finite activation in layer {0}")]
    NonFiniteActivation(usize),
    #[error("forward cache does not match the parameters or targets")]
    CacheMismatch,
    #[error("threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid activity profile: {0}")]
    InvalidProfile(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
