//! Versioned JSON persistence of fitted models.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cli_io::report::FitReport;
use crate::engine::{IbrFit, Predictor};
use crate::error::{IbrError, Result};
use crate::selection::CriterionKind;
use crate::smoother::SmootherConfig;

pub const MODEL_FORMAT: &str = "ibr-model";
pub const MODEL_VERSION: u32 = 1;

/// Everything needed to predict without the training data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format: String,
    pub version: u32,
    pub covariates: Vec<String>,
    pub response: String,
    pub smoother: SmootherConfig,
    pub base: String,
    pub criterion: CriterionKind,
    pub criterion_value: Option<f64>,
    pub k: f64,
    pub k_optimum: f64,
    pub iterations: u64,
    pub initial_df: f64,
    pub final_df: f64,
    pub rss: f64,
    pub sigma: f64,
    pub fitted: Vec<f64>,
    pub predictor: Predictor,
}

impl SavedModel {
    pub fn from_fit(fit: &IbrFit, response: &str) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            covariates: fit.base.design().names().to_vec(),
            response: response.to_string(),
            smoother: fit.config.clone(),
            base: fit.base.describe(),
            criterion: fit.criterion,
            criterion_value: fit.criterion_value,
            k: fit.k,
            k_optimum: fit.k_optimum,
            iterations: fit.iterations(),
            initial_df: fit.initial_df,
            final_df: fit.final_df,
            rss: fit.rss,
            sigma: fit.sigma,
            fitted: fit.fitted.iter().copied().collect(),
            predictor: fit.predictor(),
        }
    }

    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.predictor.predict(x_new)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        let format = value.get("format").and_then(|v| v.as_str());
        if format != Some(MODEL_FORMAT) {
            return Err(IbrError::Model(format!("{} is not an {MODEL_FORMAT} file", path.display())));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(u64::from(MODEL_VERSION)) {
            return Err(IbrError::Model(format!(
                "unsupported model version {version:?}, expected {MODEL_VERSION}"
            )));
        }
        Ok(serde_json::from_value(value)?)
    }
}

/// Rebuilds a summary from a stored model (residual quantiles unavailable).
pub fn describe_saved(model: &SavedModel) -> String {
    format!(
        "{} on {}: k = {:.3} ({} iterations, {}), df {:.4} -> {:.4}",
        model.base,
        model.response,
        model.k,
        model.iterations,
        model.criterion,
        model.initial_df,
        model.final_df
    )
}

/// Reports can be stored next to a model.
pub fn report_json(report: &FitReport) -> serde_json::Value {
    serde_json::json!({
        "residuals": report.residual_summary,
        "sigma": report.sigma,
        "residual_df": report.residual_df,
        "initial_df": report.initial_df,
        "final_df": report.final_df,
        "criterion": report.criterion,
        "criterion_value": report.criterion_value,
        "k_optimum": report.k_optimum,
        "iterations": report.iterations,
    })
}
