use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid bandwidth {name} = {value}: must be finite and > 0")]
    InvalidBandwidth { name: &'static str, value: f64 },
    #[error("invalid quantile level {0}: must lie in (0, 1)")]
    InvalidLevel(f64),
    #[error("invalid variance {0}: must be finite and > 0")]
    InvalidVariance(f64),
    #[error("sample too small: n = {n}, need at least {min}")]
    SampleTooSmall { n: usize, min: usize },
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("no sample point receives positive kernel weight at the evaluation point")]
    EmptyWindow,
    #[error("local design matrix is singular even after ridge regularization")]
    SingularDesign,
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
