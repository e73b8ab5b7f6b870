use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Core(#[from] rbmlab_core::Error),

    /// The Monte Carlo floor hides the smallest signal.
    #[error(
        "Monte Carlo floor {floor:.3e} exceeds half the smallest signal {signal:.3e} at M = {m}; \
         recommended M >= {recommended_m}"
    )]
    Floor { signal: f64, floor: f64, m: usize, recommended_m: usize },

    #[error("invalid study config: {0}")]
    Config(String),

    #[error("unknown study '{0}'")]
    UnknownStudy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, StudyError>;
