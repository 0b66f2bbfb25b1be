//! Choosing the number of iterations: closed-form information criteria
//! searched numerically or exhaustively, and cross-validation.

mod cv;
mod search;

pub use cv::{make_splits, search_k_cv, CvPlan, FoldScheme, Loss, Split, SplitType};
pub use search::{search_k_exhaustive, search_k_numeric, SearchOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{IbrError, Result};

/// Residual sums of squares at or below this value break the criteria.
pub const RSS_FLOOR: f64 = 1e-10;

/// Relative margin below `n` that the effective df must respect.
pub const DF_CEILING_MARGIN: f64 = 1e-10;

pub const DEFAULT_FRACTION: [f64; 10] = [100.0, 200.0, 500.0, 1000.0, 5000.0, 1e4, 5e4, 1e5, 5e5, 1e6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Gcv,
    Aic,
    Aicc,
    Bic,
    Gmdl,
    Rmse,
    Map,
}

impl CriterionKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcv" => Ok(Self::Gcv),
            "aic" => Ok(Self::Aic),
            "aicc" => Ok(Self::Aicc),
            "bic" => Ok(Self::Bic),
            "gmdl" => Ok(Self::Gmdl),
            "rmse" => Ok(Self::Rmse),
            "map" => Ok(Self::Map),
            other => Err(IbrError::InvalidInput(format!("unknown criterion '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gcv => "gcv",
            Self::Aic => "aic",
            Self::Aicc => "aicc",
            Self::Bic => "bic",
            Self::Gmdl => "gmdl",
            Self::Rmse => "rmse",
            Self::Map => "map",
        }
    }

    pub fn is_cross_validation(self) -> bool {
        matches!(self, Self::Rmse | Self::Map)
    }
}

impl std::fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Log-scale information criteria. `fitted_energy` is `||m_k||^2` and is
/// only used by gMDL.
pub fn criterion_value(kind: CriterionKind, n: usize, rss: f64, df: f64, fitted_energy: f64) -> Result<f64> {
    let nf = n as f64;
    if !(rss > RSS_FLOOR) {
        return Err(IbrError::Breakdown(format!(
            "residual sum of squares {rss:.3e} is at or below {RSS_FLOOR:e}"
        )));
    }
    if !(df >= 0.0 && df < nf) {
        return Err(IbrError::Breakdown(format!("df {df} outside [0, {n})")));
    }
    let fit = (rss / nf).ln();
    let value = match kind {
        CriterionKind::Gcv => fit - 2.0 * (1.0 - df / nf).ln(),
        CriterionKind::Aic => fit + 2.0 * df / nf,
        CriterionKind::Bic => fit + nf.ln() * df / nf,
        CriterionKind::Aicc => {
            if df >= nf - 2.0 {
                return Err(IbrError::Breakdown(format!("aicc undefined for df {df} >= n - 2")));
            }
            fit + 1.0 + 2.0 * (df + 1.0) / (nf - df - 2.0)
        }
        CriterionKind::Gmdl => {
            let s = rss / (nf - df);
            let f = if df > 0.0 { (fitted_energy / (df * s)).max(1.0) } else { 1.0 };
            s.ln() + df / nf * f.ln()
        }
        CriterionKind::Rmse | CriterionKind::Map => {
            return Err(IbrError::InvalidInput(format!("criterion '{kind}' needs a cross-validation plan")))
        }
    };
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Subinterval scalar minimization over real `k`.
    Numeric,
    /// Every integer `k` in range.
    Exhaustive,
    /// No search.
    Fixed(u64),
}

/// How the iteration count is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    pub criterion: CriterionKind,
    pub mode: SearchMode,
    pub kmin: f64,
    pub kmax: f64,
    /// Breakpoints splitting `[kmin, kmax]` into subintervals.
    pub fraction: Vec<f64>,
    /// Ceiling on the effective df; `None` means `2n/3`.
    pub dfmaxi: Option<f64>,
    pub cv: Option<CvPlan>,
}

impl Default for SelectionPlan {
    fn default() -> Self {
        Self {
            criterion: CriterionKind::Gcv,
            mode: SearchMode::Numeric,
            kmin: 1.0,
            kmax: 1e5,
            fraction: DEFAULT_FRACTION.to_vec(),
            dfmaxi: None,
            cv: None,
        }
    }
}

impl SelectionPlan {
    pub fn with_criterion(criterion: CriterionKind) -> Self {
        let mut plan = Self { criterion, ..Self::default() };
        if criterion.is_cross_validation() {
            plan.cv = Some(CvPlan::for_loss(Loss::from_criterion(criterion).expect("cv criterion")));
        }
        plan
    }

    pub fn dfmaxi_for(&self, n: usize) -> f64 {
        self.dfmaxi.unwrap_or(2.0 * n as f64 / 3.0)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let SearchMode::Fixed(k) = self.mode {
            if k < 1 {
                return Err(IbrError::InvalidInput("fixed iteration count must be >= 1".into()));
            }
        }
        if !(self.kmin >= 1.0 && self.kmin <= self.kmax && self.kmax.is_finite()) {
            return Err(IbrError::InvalidInput(format!(
                "need 1 <= kmin <= kmax, got [{}, {}]",
                self.kmin, self.kmax
            )));
        }
        if self.fraction.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IbrError::InvalidInput("fraction breakpoints must be ascending".into()));
        }
        let dfmaxi = self.dfmaxi_for(n);
        if !(dfmaxi > 0.0 && dfmaxi < n as f64) {
            return Err(IbrError::InvalidInput(format!("dfmaxi {dfmaxi} must lie in (0, {n})")));
        }
        match (&self.cv, self.criterion.is_cross_validation()) {
            (Some(cv), true) => {
                if Loss::from_criterion(self.criterion) != Some(cv.loss) {
                    return Err(IbrError::InvalidInput(
                        "criterion and cross-validation loss disagree".into(),
                    ));
                }
                cv.validate(n)
            }
            (None, true) if matches!(self.mode, SearchMode::Fixed(_)) => Ok(()),
            (None, true) => Err(IbrError::InvalidInput(format!(
                "criterion '{}' needs a cross-validation plan",
                self.criterion
            ))),
            (Some(_), false) => Err(IbrError::InvalidInput(format!(
                "criterion '{}' is not a cross-validation loss",
                self.criterion
            ))),
            (None, false) => Ok(()),
        }
    }

    /// Subinterval endpoints for `[lo, hi]`.
    pub(crate) fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut points = vec![lo];
        points.extend(self.fraction.iter().copied().filter(|f| *f > lo && *f < hi));
        if hi > lo {
            points.push(hi);
        }
        points
    }
}

/// One evaluated iteration count. For cross-validation `df` and `rss` are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub k: f64,
    pub df: f64,
    pub rss: f64,
    pub value: f64,
}

/// Smallest value, ties toward smaller `k`.
pub(crate) fn best_of(trace: &[Evaluation]) -> Option<Evaluation> {
    trace.iter().copied().fold(None, |best: Option<Evaluation>, e| match best {
        Some(b) if e.value > b.value || (e.value == b.value && e.k >= b.k) => Some(b),
        _ => Some(e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcv_reference_value() {
        let v = criterion_value(CriterionKind::Gcv, 100, 1.0, 10.0, 0.0).unwrap();
        assert!((v - (0.01f64.ln() - 2.0 * 0.9f64.ln())).abs() < 1e-14);
        assert!((v + 4.39445).abs() < 1e-5);
        let v0 = criterion_value(CriterionKind::Gcv, 100, 1.0, 0.0, 0.0).unwrap();
        assert!((v0 - 0.01f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn other_criteria_formulas() {
        let (n, rss, df) = (50, 2.0, 5.0);
        let base = (rss / 50.0f64).ln();
        let aic = criterion_value(CriterionKind::Aic, n, rss, df, 0.0).unwrap();
        assert!((aic - (base + 0.2)).abs() < 1e-14);
        let bic = criterion_value(CriterionKind::Bic, n, rss, df, 0.0).unwrap();
        assert!((bic - (base + 50f64.ln() * 0.1)).abs() < 1e-14);
        let aicc = criterion_value(CriterionKind::Aicc, n, rss, df, 0.0).unwrap();
        assert!((aicc - (base + 1.0 + 12.0 / 43.0)).abs() < 1e-14);
        let s: f64 = 2.0 / 45.0;
        let gmdl = criterion_value(CriterionKind::Gmdl, n, rss, df, 30.0).unwrap();
        assert!((gmdl - (s.ln() + 0.1 * (30.0 / (5.0 * s)).ln())).abs() < 1e-12);
        // clamped at F = 1
        let clamped = criterion_value(CriterionKind::Gmdl, n, rss, df, 1e-6).unwrap();
        assert!((clamped - s.ln()).abs() < 1e-14);
    }

    #[test]
    fn criterion_errors() {
        assert!(matches!(
            criterion_value(CriterionKind::Gcv, 10, 1e-11, 2.0, 0.0),
            Err(IbrError::Breakdown(_))
        ));
        assert!(criterion_value(CriterionKind::Aicc, 10, 1.0, 8.0, 0.0).is_err());
        assert!(criterion_value(CriterionKind::Rmse, 10, 1.0, 2.0, 0.0).is_err());
        assert!(criterion_value(CriterionKind::Gcv, 10, 1.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn plan_validation() {
        assert!(SelectionPlan::default().validate(30).is_ok());
        let bad = SelectionPlan { kmin: 10.0, kmax: 5.0, ..SelectionPlan::default() };
        assert!(bad.validate(30).is_err());
        let bad = SelectionPlan { dfmaxi: Some(40.0), ..SelectionPlan::default() };
        assert!(bad.validate(30).is_err());
        let bad = SelectionPlan { criterion: CriterionKind::Rmse, ..SelectionPlan::default() };
        assert!(bad.validate(30).is_err());
        assert!(SelectionPlan::with_criterion(CriterionKind::Map).validate(30).is_ok());
    }

    #[test]
    fn breakpoints_are_clamped() {
        let plan = SelectionPlan::default();
        assert_eq!(plan.breakpoints(1.0, 700.0), vec![1.0, 100.0, 200.0, 500.0, 700.0]);
        assert_eq!(plan.breakpoints(1.0, 1.0), vec![1.0]);
    }
}
