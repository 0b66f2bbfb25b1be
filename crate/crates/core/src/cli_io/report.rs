//! Human-readable fit summaries.

use std::fmt;

use crate::engine::IbrFit;
use crate::selection::SearchMode;

/// Type-7 sample quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Min, first quartile, median, third quartile, max.
    pub residual_summary: [f64; 5],
    pub sigma: f64,
    pub residual_df: f64,
    pub initial_df: f64,
    pub final_df: f64,
    pub criterion: String,
    pub criterion_value: Option<f64>,
    pub k_optimum: f64,
    pub iterations: u64,
    pub fixed: bool,
    pub exhaustive: bool,
    pub base: String,
}

impl FitReport {
    pub fn from_fit(fit: &IbrFit) -> Self {
        let mut r: Vec<f64> = fit.residuals.iter().copied().collect();
        r.sort_by(f64::total_cmp);
        let residual_summary = [0.0, 0.25, 0.5, 0.75, 1.0].map(|p| quantile(&r, p));
        Self {
            residual_summary,
            sigma: fit.sigma,
            residual_df: fit.residual_df(),
            initial_df: fit.initial_df,
            final_df: fit.final_df,
            criterion: fit.criterion.name().to_string(),
            criterion_value: fit.criterion_value,
            k_optimum: fit.k_optimum,
            iterations: fit.iterations(),
            fixed: matches!(fit.mode, SearchMode::Fixed(_)),
            exhaustive: fit.mode == SearchMode::Exhaustive,
            base: fit.base.describe(),
        }
    }
}

fn sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Residuals:")?;
        writeln!(f, "{:>10} {:>10} {:>10} {:>10} {:>10}", "Min", "1Q", "Median", "3Q", "Max")?;
        let q: Vec<String> = self.residual_summary.iter().map(|v| format!("{:>10}", sig(*v, 6))).collect();
        writeln!(f, "{}", q.join(" "))?;
        writeln!(
            f,
            "Residual standard error: {} on {} degrees of freedom",
            sig(self.sigma, 4),
            sig(self.residual_df, 4)
        )?;
        writeln!(f)?;
        writeln!(f, "Initial df: {} ; Final df: {}", sig(self.initial_df, 4), sig(self.final_df, 4))?;
        if let Some(v) = self.criterion_value {
            writeln!(f, "{:>6}", self.criterion)?;
            writeln!(f, "{}", sig(v, 4))?;
        }
        writeln!(f)?;
        if self.fixed {
            writeln!(f, "Number of iterations: {} (fixed)", self.iterations)?;
        } else {
            let how = if self.exhaustive { "exhaustive search" } else { "numeric search" };
            writeln!(
                f,
                "Number of iterations: {} chosen by {} ({how}, optimum at k = {:.3})",
                self.iterations, self.criterion, self.k_optimum
            )?;
        }
        write!(f, "Base smoother: {}", self.base)
    }
}
