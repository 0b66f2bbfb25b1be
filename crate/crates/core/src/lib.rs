//! Iterative bias reduction: repeatedly smoothing residuals of a deliberately
//! over-smoothed base fit, with the iteration count chosen by a model
//! selection criterion or cross-validation.
//!
//! ```no_run
//! use ibr::{fit, SelectionPlan, SmootherConfig};
//! # fn demo(x: &ibr::DesignMatrix, y: &nalgebra::DVector<f64>) -> ibr::Result<()> {
//! let model = fit(x, y, &SmootherConfig::default(), &SelectionPlan::default())?;
//! println!("k = {}, df = {}", model.k, model.final_df);
//! # Ok(()) }
//! ```

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod engine;
pub mod error;
pub mod forward;
pub mod numeric;
pub mod selection;
pub mod smoother;

pub use engine::{
    coefficients, df_of_k, fit, iterate_fitted, iterate_fitted_recursive, predict, residuals_of_k, rss_of_k,
    IbrFit, Predictor,
};
pub use error::{IbrError, Result};
pub use forward::{forward_select, ForwardResult};
pub use selection::{
    criterion_value, make_splits, CriterionKind, CvPlan, Evaluation, FoldScheme, Loss, SearchMode,
    SelectionPlan, Split, SplitType,
};
pub use smoother::{BaseSmoother, DesignMatrix, KernelKind, SmootherConfig, SpectralForm};

/// Matrix types used throughout the public API.
pub use nalgebra;
