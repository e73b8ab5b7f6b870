use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown model preset `{0}`")]
    Name(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical blowup at particle {particle}, t = {time}")]
    NumericalBlowup { particle: usize, time: f64 },

    #[error("time step {dt} exceeds the stability bound; admissible dt <= {admissible}")]
    Stability { dt: f64, admissible: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("instance too large: {0}")]
    Size(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("no convergence after {steps} steps (last increment {last})")]
    Convergence { steps: usize, last: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
