use thiserror::Error;

/// Errors raised while building smoothers, fitting, selecting the iteration
/// count, or reading and writing files.
#[derive(Debug, Error)]
pub enum IbrError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("eigendecomposition failed: {0}")]
    Decomposition(String),

    #[error("real-valued k = {k} requires eigenvalues in [0, 1]; found {min_eigen:.3e}..{max_eigen:.3e}, use integer k")]
    NonIntegerK { k: f64, min_eigen: f64, max_eigen: f64 },

    #[error("criterion breakdown: {0}")]
    Breakdown(String),

    #[error(
        "no admissible iteration count: {0} (try a smaller initial df so the base smoother is smoother)"
    )]
    NoAdmissibleK(String),

    #[error("point outside kernel support: {0}")]
    OutsideSupport(String),

    #[error("cross-validation fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<IbrError>,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IbrError>;
