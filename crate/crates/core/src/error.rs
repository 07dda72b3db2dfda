use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("horizon {horizon} is not an integer multiple of step {step}")]
    NonIntegerSteps { horizon: f64, step: f64 },

    #[error("coarsening factor {factor} does not divide {steps} steps")]
    NotDivisible { steps: usize, factor: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("step left the coordinate chart at {point:?}")]
    ChartExit { point: Vec<f64> },

    #[error("scheme requires a single noise dimension, got {0}")]
    UnsupportedNoiseDimension(usize),

    #[error("missing derivative information: {0}")]
    MissingDerivative(&'static str),

    #[error("ill-conditioned evaluation: {0}")]
    IllConditioned(String),

    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),

    #[error("no admissible alpha for a = {a}: the bounded regime needs a < 0")]
    NoValidAlpha { a: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("scheme and reference samples are not coupled: {0}")]
    Uncoupled(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("invalid block split: {0}")]
    InvalidSplit(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
