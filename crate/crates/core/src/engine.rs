//! Iterative bias reduction on top of a base smoother.
//!
//! After `k` rounds the fitted values are `m_k = (I - (I - S)^k) Y`. With
//! `S = D^{1/2} U diag(lambda) U' D^{-1/2}` every quantity is available in
//! closed form for real `k`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{IbrError, Result};
use crate::selection::{self, criterion_value, CriterionKind, Evaluation, SearchMode, SelectionPlan};
use crate::smoother::kernel::kernel_value;
use crate::smoother::tps::{radial_basis, tps_monomials};
use crate::smoother::{
    BaseSmoother, DesignMatrix, KernelKind, SmootherConfig, SpectralForm, EIGEN_TOLERANCE,
};

fn is_integer(k: f64) -> bool {
    k.fract() == 0.0 && k.abs() < i32::MAX as f64
}

fn check_k(spec: &SpectralForm, k: f64) -> Result<()> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(IbrError::InvalidInput(format!("iteration count {k} must be finite and >= 0")));
    }
    if !is_integer(k) && !spec.supports_real_k() {
        return Err(IbrError::NonIntegerK {
            k,
            min_eigen: spec.min_eigenvalue(),
            max_eigen: spec.max_eigenvalue(),
        });
    }
    Ok(())
}

fn in_unit_interval(lambda: f64) -> bool {
    (-EIGEN_TOLERANCE..=1.0 + EIGEN_TOLERANCE).contains(&lambda)
}

/// `(1 - lambda)^k`
pub(crate) fn decay(lambda: f64, k: f64) -> f64 {
    if k == 0.0 {
        return 1.0;
    }
    if in_unit_interval(lambda) {
        let l = lambda.clamp(0.0, 1.0);
        (k * (-l).ln_1p()).exp()
    } else {
        (1.0 - lambda).powi(k as i32)
    }
}

/// `(1 - (1 - lambda)^k) / lambda`, with limit `k` at `lambda = 0`.
pub(crate) fn geometric(lambda: f64, k: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    if lambda.abs() < 1e-12 {
        return k - 0.5 * k * (k - 1.0) * lambda;
    }
    if in_unit_interval(lambda) {
        let l = lambda.clamp(0.0, 1.0);
        -(k * (-l).ln_1p()).exp_m1() / l
    } else {
        (1.0 - (1.0 - lambda).powi(k as i32)) / lambda
    }
}

fn check_len(spec: &SpectralForm, y: &DVector<f64>) -> Result<()> {
    if y.len() != spec.n() {
        return Err(IbrError::InvalidInput(format!(
            "response has length {}, smoother has {} points",
            y.len(),
            spec.n()
        )));
    }
    Ok(())
}

/// `z = U' D^{-1/2} y`
pub(crate) fn eigen_coordinates(spec: &SpectralForm, y: &DVector<f64>) -> DVector<f64> {
    let scaled = y.component_div(spec.d_half());
    spec.u().tr_mul(&scaled)
}

/// Maps eigen coordinates back: `D^{1/2} U c`.
pub(crate) fn from_eigen(spec: &SpectralForm, c: &DVector<f64>) -> DVector<f64> {
    (spec.u() * c).component_mul(spec.d_half())
}

/// Residual `Y - m_k = D^{1/2} U (I - Lambda)^k U' D^{-1/2} Y`.
pub fn residuals_of_k(spec: &SpectralForm, y: &DVector<f64>, k: f64) -> Result<DVector<f64>> {
    check_len(spec, y)?;
    check_k(spec, k)?;
    let z = eigen_coordinates(spec, y);
    let c =
        DVector::from_iterator(z.len(), z.iter().zip(spec.lambda().iter()).map(|(z, l)| z * decay(*l, k)));
    Ok(from_eigen(spec, &c))
}

/// Fitted values `m_k` from the spectral closed form.
pub fn iterate_fitted(spec: &SpectralForm, y: &DVector<f64>, k: f64) -> Result<DVector<f64>> {
    if k == 0.0 {
        check_len(spec, y)?;
        return Ok(DVector::zeros(y.len()));
    }
    Ok(y - residuals_of_k(spec, y, k)?)
}

/// Fitted values `m_k` by repeatedly smoothing residuals.
pub fn iterate_fitted_recursive(s: &BaseSmoother, y: &DVector<f64>, k: u64) -> Result<DVector<f64>> {
    let m = s.matrix();
    if y.len() != m.nrows() {
        return Err(IbrError::InvalidInput(format!(
            "response has length {}, smoother has {} points",
            y.len(),
            m.nrows()
        )));
    }
    let mut residual = y.clone();
    for _ in 0..k {
        residual -= m * &residual;
    }
    Ok(y - residual)
}

/// Coefficients `beta_k` with `S beta_k = m_k`.
pub fn coefficients(spec: &SpectralForm, y: &DVector<f64>, k: f64) -> Result<DVector<f64>> {
    check_len(spec, y)?;
    check_k(spec, k)?;
    let z = eigen_coordinates(spec, y);
    let c = DVector::from_iterator(
        z.len(),
        z.iter().zip(spec.lambda().iter()).map(|(z, l)| z * geometric(*l, k)),
    );
    Ok(from_eigen(spec, &c))
}

/// Effective degrees of freedom `trace(I - (I - S)^k)`.
pub fn df_of_k(spec: &SpectralForm, k: f64) -> Result<f64> {
    check_k(spec, k)?;
    Ok(spec.lambda().iter().map(|l| 1.0 - decay(*l, k)).sum())
}

/// Residual sum of squares `||Y - m_k||^2`.
pub fn rss_of_k(spec: &SpectralForm, y: &DVector<f64>, k: f64) -> Result<f64> {
    Ok(residuals_of_k(spec, y, k)?.norm_squared())
}

/// Self-contained out-of-sample evaluator `m_k(x) = S(x)' beta_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Predictor {
    Kernel {
        kind: KernelKind,
        bandwidths: Vec<f64>,
        rows: Vec<Vec<f64>>,
        beta: Vec<f64>,
    },
    Tps {
        order: usize,
        rows: Vec<Vec<f64>>,
        /// Radial coefficients of the iterated fit.
        radial: Vec<f64>,
        /// Polynomial coefficients of the iterated fit.
        poly: Vec<f64>,
    },
}

impl Predictor {
    pub fn from_base(base: &BaseSmoother, beta: &DVector<f64>) -> Self {
        let rows = base.design().rows().to_vec();
        match base {
            BaseSmoother::Kernel(k) => Predictor::Kernel {
                kind: k.spec.kind,
                bandwidths: k.spec.bandwidths.clone(),
                rows,
                beta: beta.iter().copied().collect(),
            },
            BaseSmoother::Tps(t) => Predictor::Tps {
                order: t.spec.order,
                rows,
                radial: (t.radial_map() * beta).iter().copied().collect(),
                poly: (t.poly_map() * beta).iter().copied().collect(),
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Predictor::Kernel { rows, .. } | Predictor::Tps { rows, .. } => rows[0].len(),
        }
    }

    pub fn predict_point(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(IbrError::InvalidInput(format!(
                "point has {} coordinates, expected {}",
                point.len(),
                self.dim()
            )));
        }
        match self {
            Predictor::Kernel { kind, bandwidths, rows, beta } => {
                let mut num = 0.0;
                let mut den = 0.0;
                for (row, b) in rows.iter().zip(beta) {
                    let mut w = 1.0;
                    for ((p, r), h) in point.iter().zip(row).zip(bandwidths) {
                        w *= kernel_value((p - r) / h, *kind);
                    }
                    num += w * b;
                    den += w;
                }
                if !(den > 0.0) {
                    return Err(IbrError::OutsideSupport(format!("{point:?}")));
                }
                Ok(num / den)
            }
            Predictor::Tps { order, rows, radial, poly } => {
                let d = point.len();
                let mut value = 0.0;
                for (row, a) in rows.iter().zip(radial) {
                    let r = point.iter().zip(row).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                    value += a * radial_basis(r, *order, d);
                }
                let phi = tps_monomials(*order, d, point);
                value += phi.iter().zip(poly).map(|(p, b)| p * b).sum::<f64>();
                Ok(value)
            }
        }
    }

    /// Predicts each row of `x_new`.
    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x_new.ncols() != self.dim() {
            return Err(IbrError::InvalidInput(format!(
                "new data has {} columns, model expects {}",
                x_new.ncols(),
                self.dim()
            )));
        }
        let values = x_new
            .row_iter()
            .map(|r| {
                let p: Vec<f64> = r.iter().copied().collect();
                self.predict_point(&p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(values))
    }
}

/// A fitted iterative bias reduction smoother.
#[derive(Debug, Clone)]
pub struct IbrFit {
    pub config: SmootherConfig,
    pub base: Arc<BaseSmoother>,
    pub spectral: Arc<SpectralForm>,
    /// Iteration count used for the fit: the selected optimum truncated to
    /// an integer.
    pub k: f64,
    /// Unrounded minimizer found by the search (equal to `k` for integer searches).
    pub k_optimum: f64,
    pub mode: SearchMode,
    pub criterion: CriterionKind,
    /// Criterion value at `k`; for cross-validation, the mean loss at `k_optimum`.
    pub criterion_value: Option<f64>,
    pub initial_df: f64,
    pub final_df: f64,
    pub beta: DVector<f64>,
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    /// `sqrt(rss / (n - final_df))`
    pub sigma: f64,
    pub trace: Vec<Evaluation>,
}

impl IbrFit {
    pub fn n(&self) -> usize {
        self.beta.len()
    }

    pub fn iterations(&self) -> u64 {
        self.k as u64
    }

    pub fn residual_df(&self) -> f64 {
        self.n() as f64 - self.final_df
    }

    /// Evaluates a closed-form criterion at the fitted `k`.
    pub fn evaluate(&self, kind: CriterionKind) -> Result<f64> {
        criterion_value(kind, self.n(), self.rss, self.final_df, self.fitted.norm_squared())
    }

    pub fn predictor(&self) -> Predictor {
        Predictor::from_base(&self.base, &self.beta)
    }

    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.predictor().predict(x_new)
    }
}

fn validate_response(x: &DesignMatrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != x.n() {
        return Err(IbrError::InvalidInput(format!(
            "response has {} values for {} design rows",
            y.len(),
            x.n()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(IbrError::InvalidInput(format!("response value {} is not finite", i + 1)));
    }
    Ok(())
}

/// Calibrates the base smoother, chooses `k`, and assembles the fit.
pub fn fit(
    x: &DesignMatrix,
    y: &DVector<f64>,
    config: &SmootherConfig,
    plan: &SelectionPlan,
) -> Result<IbrFit> {
    validate_response(x, y)?;
    plan.validate(x.n())?;
    let base = config.build(x)?;
    let spectral = base.spectral_decompose()?;

    let (k, value, trace) = match (plan.mode, &plan.cv) {
        (SearchMode::Fixed(k), _) => (k as f64, None, Vec::new()),
        (_, Some(cv)) => {
            let outcome = selection::search_k_cv(x, y, config, cv, plan)?;
            (outcome.k, Some(outcome.value), outcome.trace)
        }
        (SearchMode::Numeric, None) if spectral.supports_real_k() => {
            let outcome = selection::search_k_numeric(&spectral, y, plan)?;
            (outcome.k, Some(outcome.value), outcome.trace)
        }
        (mode, None) => {
            if mode == SearchMode::Numeric {
                log::warn!("spectrum outside [0, 1]; falling back to exhaustive integer search");
            }
            let outcome = selection::search_k_exhaustive(&spectral, y, plan)?;
            (outcome.k, Some(outcome.value), outcome.trace)
        }
    };
    assemble(config.clone(), base, spectral, y, k, plan, value, trace)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    config: SmootherConfig,
    base: BaseSmoother,
    spectral: SpectralForm,
    y: &DVector<f64>,
    k_optimum: f64,
    plan: &SelectionPlan,
    value: Option<f64>,
    trace: Vec<Evaluation>,
) -> Result<IbrFit> {
    let n = y.len();
    let k = k_optimum.floor().max(1.0);
    let beta = coefficients(&spectral, y, k)?;
    let residuals = residuals_of_k(&spectral, y, k)?;
    let fitted = y - &residuals;
    let rss = residuals.norm_squared();
    let final_df = df_of_k(&spectral, k)?;
    let initial_df = base.trace();
    let criterion_value = if plan.criterion.is_cross_validation() {
        value
    } else {
        criterion_value(plan.criterion, n, rss, final_df, fitted.norm_squared()).ok()
    };
    Ok(IbrFit {
        config,
        base: Arc::new(base),
        spectral: Arc::new(spectral),
        k,
        k_optimum,
        mode: plan.mode,
        criterion: plan.criterion,
        criterion_value,
        initial_df,
        final_df,
        beta,
        fitted,
        residuals,
        rss,
        sigma: (rss / (n as f64 - final_df)).sqrt(),
        trace,
    })
}

/// Predicts at the rows of `x_new`.
pub fn predict(fit: &IbrFit, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    fit.predict(x_new)
}
