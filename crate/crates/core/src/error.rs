use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the validated range of a model.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to reach its target accuracy.
    #[error("numerical error: {0}")]
    Numerics(String),

    /// The calibration anchor could not be applied.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// A fit could not be set up or evaluated.
    #[error("fit error: {0}")]
    Fit(String),

    /// Observed rate at or beyond the dead-time pole.
    #[error("saturation: observed rate {observed_cps:.6e} /s is at or above 1/tau")]
    Saturated { observed_cps: f64 },

    /// Bad configuration document.
    #[error("config error: {0}")]
    Config(String),

    #[error("malformed input at row {row}: {message}")]
    MalformedInput { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
