use thiserror::Error;

/// Errors raised anywhere in the simulation and pricing pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("model evaluation produced a non-finite {coefficient} at t={t}, x={x}, m={m}")]
    ModelEvaluation {
        coefficient: &'static str,
        t: f64,
        x: f64,
        m: f64,
    },

    #[error("jump coefficient has vanishing z-derivative at t={t}, x={x}, z={z}")]
    SingularJumpCoefficient { t: f64, x: f64, z: f64 },

    #[error("first-variation process degenerates on path {path} at t={t} (factor {factor})")]
    DegenerateVariation { path: usize, t: f64, factor: f64 },

    #[error("numerical integration failed: {0}")]
    NumericalIntegration(String),

    #[error("localization parameter cannot be estimated: all target values vanish")]
    LocalizationDegenerate,

    #[error("estimator breakdown at step {step}: a fraction {fraction:.3} of denominators fell back")]
    EstimatorBreakdown { step: usize, fraction: f64 },

    #[error("finite-difference solution became unstable at t={t}; refine the grid")]
    FdInstability { t: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
