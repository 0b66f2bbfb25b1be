//! File formats, reports, benchmarks and the command-line front end.

pub mod bench;
pub mod cli;
pub mod data;
pub mod model_file;
pub mod report;
pub mod surface;

pub use data::{load_covariates, load_csv, read_table, validate_ozone, Dataset, ResponseSelector, Table};
pub use model_file::{SavedModel, MODEL_FORMAT, MODEL_VERSION};
pub use report::FitReport;
pub use surface::GridSurface;
