//! Guarded searches over `k` for closed-form criteria.

use nalgebra::{DMatrix, DVector};

use super::{
    best_of, criterion_value, CriterionKind, Evaluation, SelectionPlan, DF_CEILING_MARGIN, RSS_FLOOR,
};
use crate::engine::{decay, eigen_coordinates};
use crate::error::{IbrError, Result};
use crate::numeric::brent_min;
use crate::smoother::SpectralForm;

/// Absolute tolerance in `k` for each subinterval minimization.
const K_TOLERANCE: f64 = 0.01;

/// Integer iteration counts evaluated together in one matrix product.
const BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub k: f64,
    pub value: f64,
    /// Every admitted evaluation, in evaluation order.
    pub trace: Vec<Evaluation>,
    /// Number of evaluations refused by the guards.
    pub rejected: usize,
}

/// Evaluates df, RSS and a criterion at arbitrary `k`.
struct Evaluator<'a> {
    spec: &'a SpectralForm,
    y: &'a DVector<f64>,
    z: DVector<f64>,
    kind: CriterionKind,
    dfmaxi: f64,
    df_ceiling: f64,
}

impl<'a> Evaluator<'a> {
    fn new(spec: &'a SpectralForm, y: &'a DVector<f64>, plan: &SelectionPlan) -> Result<Self> {
        if plan.criterion.is_cross_validation() {
            return Err(IbrError::InvalidInput(format!(
                "criterion '{}' needs a cross-validation plan",
                plan.criterion
            )));
        }
        if y.len() != spec.n() {
            return Err(IbrError::InvalidInput("response length does not match smoother".into()));
        }
        let n = spec.n() as f64;
        Ok(Self {
            spec,
            y,
            z: eigen_coordinates(spec, y),
            kind: plan.criterion,
            dfmaxi: plan.dfmaxi_for(spec.n()),
            df_ceiling: n * (1.0 - DF_CEILING_MARGIN),
        })
    }

    fn decays(&self, k: f64) -> DVector<f64> {
        self.spec.lambda().map(|l| decay(l, k))
    }

    fn df(&self, k: f64) -> f64 {
        self.spec.lambda().iter().map(|l| 1.0 - decay(*l, k)).sum()
    }

    fn df_ok(&self, df: f64) -> bool {
        df.is_finite() && df <= self.dfmaxi && df <= self.df_ceiling
    }

    /// `(rss, ||m_k||^2)` from eigen coordinates `c = decay * z`.
    fn rss_and_energy(&self, c: &DVector<f64>) -> (f64, f64) {
        if self.spec.is_symmetric() {
            // U is orthogonal: residual and fit are orthogonal images
            let rss = c.norm_squared();
            let energy = self.z.iter().zip(c.iter()).map(|(z, c)| (z - c).powi(2)).sum();
            (rss, energy)
        } else {
            let r = (self.spec.u() * c).component_mul(self.spec.d_half());
            let energy = (self.y - &r).norm_squared();
            (r.norm_squared(), energy)
        }
    }

    fn finish(&self, k: f64, df: f64, rss: f64, energy: f64) -> Option<Evaluation> {
        if !self.df_ok(df) || !(rss > RSS_FLOOR) {
            return None;
        }
        let value = criterion_value(self.kind, self.spec.n(), rss, df, energy).ok()?;
        value.is_finite().then_some(Evaluation { k, df, rss, value })
    }

    /// `None` when a guard refuses `k`.
    fn evaluate(&self, k: f64) -> Option<Evaluation> {
        let df = self.df(k);
        if !self.df_ok(df) {
            return None;
        }
        let c = self.decays(k).component_mul(&self.z);
        let (rss, energy) = self.rss_and_energy(&c);
        self.finish(k, df, rss, energy)
    }

    /// Evaluates consecutive integers `ks` with one matrix product.
    fn evaluate_batch(&self, ks: &[f64]) -> Vec<Option<Evaluation>> {
        let n = self.spec.n();
        let dfs: Vec<f64> = ks.iter().map(|k| self.df(*k)).collect();
        if self.spec.is_symmetric() {
            return ks
                .iter()
                .zip(&dfs)
                .map(|(k, df)| {
                    if !self.df_ok(*df) {
                        return None;
                    }
                    let c = self.decays(*k).component_mul(&self.z);
                    let (rss, energy) = self.rss_and_energy(&c);
                    self.finish(*k, *df, rss, energy)
                })
                .collect();
        }
        let c = DMatrix::from_fn(n, ks.len(), |i, j| decay(self.spec.lambda()[i], ks[j]) * self.z[i]);
        let mut r = self.spec.u() * c;
        for (i, mut row) in r.row_iter_mut().enumerate() {
            row *= self.spec.d_half()[i];
        }
        ks.iter()
            .enumerate()
            .map(|(j, k)| {
                let col = r.column(j);
                let rss = col.norm_squared();
                let energy = (self.y - col).norm_squared();
                self.finish(*k, dfs[j], rss, energy)
            })
            .collect()
    }
}

/// Largest admissible `k` in `[lo, hi]` given `lo` is admissible, assuming
/// admissibility is monotone (df grows and RSS shrinks with `k`).
fn admissible_ceiling(eval: &Evaluator<'_>, lo: f64, hi: f64) -> f64 {
    if eval.evaluate(hi).is_some() {
        return hi;
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if eval.evaluate(mid.exp()).is_some() {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    a.exp().max(lo)
}

/// Minimizes the criterion over real `k` by running a scalar minimizer on
/// each subinterval between the `fraction` breakpoints.
pub fn search_k_numeric(
    spec: &SpectralForm,
    y: &DVector<f64>,
    plan: &SelectionPlan,
) -> Result<SearchOutcome> {
    if !spec.supports_real_k() {
        return Err(IbrError::NonIntegerK {
            k: f64::NAN,
            min_eigen: spec.min_eigenvalue(),
            max_eigen: spec.max_eigenvalue(),
        });
    }
    let eval = Evaluator::new(spec, y, plan)?;
    let mut trace = Vec::new();
    let mut rejected = 0;

    let kmin = plan.kmin;
    let kmax = plan.kmax.max(kmin);
    match eval.evaluate(kmin) {
        Some(e) => trace.push(e),
        None => {
            return Err(IbrError::NoAdmissibleK(format!(
                "criterion guards reject k = {kmin} (df {:.4}, rss {:.3e})",
                eval.df(kmin),
                crate::engine::rss_of_k(spec, y, kmin).unwrap_or(f64::NAN)
            )))
        }
    }
    let cap = admissible_ceiling(&eval, kmin, kmax);
    let points = plan.breakpoints(kmin, cap);
    for &p in &points[1..] {
        match eval.evaluate(p) {
            Some(e) => trace.push(e),
            None => rejected += 1,
        }
    }
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 2.0 * K_TOLERANCE {
            continue;
        }
        brent_min(
            |k| match eval.evaluate(k) {
                Some(e) => {
                    trace.push(e);
                    e.value
                }
                None => {
                    rejected += 1;
                    f64::INFINITY
                }
            },
            a,
            b,
            K_TOLERANCE,
        );
    }
    let best = best_of(&trace).ok_or_else(|| IbrError::NoAdmissibleK("all subintervals rejected".into()))?;
    Ok(SearchOutcome { k: best.k, value: best.value, trace, rejected })
}

/// Evaluates every integer `k` in `[kmin, kmax]` and returns the minimizer.
pub fn search_k_exhaustive(
    spec: &SpectralForm,
    y: &DVector<f64>,
    plan: &SelectionPlan,
) -> Result<SearchOutcome> {
    let eval = Evaluator::new(spec, y, plan)?;
    let first = plan.kmin.ceil().max(1.0) as u64;
    let mut last = plan.kmax.floor() as u64;
    let monotone = spec.supports_real_k();
    if monotone && first <= last {
        // df is increasing: cut the range where the df guards start failing
        if !eval.df_ok(eval.df(first as f64)) {
            return Err(IbrError::NoAdmissibleK(format!(
                "df at k = {first} is {:.4}, above the ceiling {:.4}",
                eval.df(first as f64),
                eval.dfmaxi
            )));
        }
        if !eval.df_ok(eval.df(last as f64)) {
            let (mut lo, mut hi) = (first, last);
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if eval.df_ok(eval.df(mid as f64)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            last = lo;
        }
    }
    let mut trace = Vec::new();
    let mut rejected = 0;
    let mut k = first;
    'outer: while k <= last {
        let end = (k + BATCH as u64 - 1).min(last);
        let ks: Vec<f64> = (k..=end).map(|v| v as f64).collect();
        for e in eval.evaluate_batch(&ks) {
            match e {
                Some(e) => trace.push(e),
                None if monotone => break 'outer,
                None => rejected += 1,
            }
        }
        k = end + 1;
    }
    let best = best_of(&trace).ok_or_else(|| {
        IbrError::NoAdmissibleK(format!("no integer k in [{first}, {last}] passes the guards"))
    })?;
    Ok(SearchOutcome { k: best.k, value: best.value, trace, rejected })
}
