use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Observation lies outside the support of the family.
    #[error("value {value} is outside the support of the {family} family")]
    Domain { family: &'static str, value: f64 },

    /// Natural parameter outside the open natural parameter space.
    #[error("invalid parameter for the {family} family: {reason}")]
    Parameter { family: &'static str, reason: String },

    /// The region statistics do not determine a parameter (e.g. zero variance).
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("level-set initialization failed: {0}")]
    Init(String),

    #[error("reinitialization failed: {0}")]
    Reinit(String),

    #[error("invalid benchmark specification: {0}")]
    Spec(String),

    #[error("evaluation failed: {0}")]
    Eval(String),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("calibration check failed: {0}")]
    Calibration(String),

    #[error("{0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
