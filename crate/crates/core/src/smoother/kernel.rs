//! Product-kernel Nadaraya-Watson smoothers and bandwidth calibration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DesignMatrix;
use crate::error::{IbrError, Result};
use crate::numeric::brent_root;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Bracket expansions before bandwidth calibration gives up.
const MAX_BRACKET_EXPANSIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
    Triangle,
    Quartic,
    Epanechnikov,
    Uniform,
}

impl KernelKind {
    /// Parses the one-letter tags `g`, `t`, `q`, `e`, `u` (or full names).
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag.to_ascii_lowercase().as_str() {
            "g" | "gaussian" => Ok(Self::Gaussian),
            "t" | "triangle" => Ok(Self::Triangle),
            "q" | "quartic" | "biweight" => Ok(Self::Quartic),
            "e" | "epanechnikov" => Ok(Self::Epanechnikov),
            "u" | "uniform" => Ok(Self::Uniform),
            other => Err(IbrError::InvalidInput(format!("unknown kernel '{other}'"))),
        }
    }

    pub fn tag(self) -> char {
        match self {
            Self::Gaussian => 'g',
            Self::Triangle => 't',
            Self::Quartic => 'q',
            Self::Epanechnikov => 'e',
            Self::Uniform => 'u',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Triangle => "triangle",
            Self::Quartic => "quartic",
            Self::Epanechnikov => "epanechnikov",
            Self::Uniform => "uniform",
        }
    }

    /// Only the gaussian and triangle densities give a positive definite
    /// kernel matrix, which keeps the iterated smoother convergent.
    pub fn positive_definite(self) -> bool {
        matches!(self, Self::Gaussian | Self::Triangle)
    }

    pub fn has_compact_support(self) -> bool {
        !matches!(self, Self::Gaussian)
    }
}

/// Evaluates the kernel density at `u`.
pub fn kernel_value(u: f64, kind: KernelKind) -> f64 {
    let a = u.abs();
    match kind {
        KernelKind::Gaussian => FRAC_1_SQRT_2PI * (-0.5 * u * u).exp(),
        KernelKind::Triangle => (1.0 - a).max(0.0),
        KernelKind::Quartic => {
            if a < 1.0 {
                let t = 1.0 - u * u;
                0.9375 * t * t
            } else {
                0.0
            }
        }
        KernelKind::Epanechnikov => {
            if a < 1.0 {
                0.75 * (1.0 - u * u)
            } else {
                0.0
            }
        }
        KernelKind::Uniform => {
            if a <= 1.0 {
                0.5
            } else {
                0.0
            }
        }
    }
}

/// How the bandwidths were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DfTarget {
    /// Each univariate smoother has this trace.
    PerVariable(f64),
    /// The full product smoother has this trace.
    Total(f64),
    /// Bandwidths were supplied directly.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSmootherSpec {
    pub kind: KernelKind,
    pub bandwidths: Vec<f64>,
    pub target: DfTarget,
}

impl KernelSmootherSpec {
    pub fn manual(kind: KernelKind, bandwidths: Vec<f64>) -> Self {
        Self { kind, bandwidths, target: DfTarget::Manual }
    }

    /// Calibrates one bandwidth per column so that each univariate smoother
    /// has trace `df`.
    pub fn per_variable(x: &DesignMatrix, kind: KernelKind, df: f64) -> Result<Self> {
        let bandwidths = (0..x.d())
            .map(|j| {
                let col: Vec<f64> = x.column(j).iter().copied().collect();
                calibrate_bandwidth(&col, kind, df)
                    .map_err(|e| IbrError::Calibration(format!("column '{}': {e}", x.names()[j])))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, bandwidths, target: DfTarget::PerVariable(df) })
    }

    /// Calibrates a common scale factor so that the product smoother has
    /// trace `total_df`.
    pub fn total(x: &DesignMatrix, kind: KernelKind, total_df: f64) -> Result<Self> {
        let bandwidths = calibrate_total_df(x, kind, total_df)?;
        Ok(Self { kind, bandwidths, target: DfTarget::Total(total_df) })
    }
}

/// Kernel smoother `S = D K` with `K` the symmetric product-kernel Gram
/// matrix and `D = diag(1 / row sums of K)`.
#[derive(Debug, Clone)]
pub struct KernelSmoother {
    pub(crate) design: DesignMatrix,
    pub(crate) spec: KernelSmootherSpec,
    pub(crate) gram: DMatrix<f64>,
    pub(crate) row_sums: DVector<f64>,
    pub(crate) matrix: DMatrix<f64>,
}

fn product_kernel(a: &[f64], b: &[f64], h: &[f64], kind: KernelKind) -> f64 {
    let mut w = 1.0;
    for ((ai, bi), hi) in a.iter().zip(b).zip(h) {
        w *= kernel_value((ai - bi) / hi, kind);
        if w == 0.0 {
            break;
        }
    }
    w
}

fn validate_bandwidths(h: &[f64], d: usize) -> Result<()> {
    if h.len() != d {
        return Err(IbrError::InvalidInput(format!("expected {d} bandwidths, got {}", h.len())));
    }
    if let Some(bad) = h.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(IbrError::InvalidInput(format!("bandwidth {bad} must be positive and finite")));
    }
    Ok(())
}

/// Builds the row-stochastic kernel smoothing matrix for `x`.
pub fn build_kernel_smoother(x: &DesignMatrix, spec: KernelSmootherSpec) -> Result<KernelSmoother> {
    validate_bandwidths(&spec.bandwidths, x.d())?;
    let n = x.n();
    let rows = x.rows();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let w = product_kernel(&rows[i], &rows[j], &spec.bandwidths, spec.kind);
            gram[(i, j)] = w;
            gram[(j, i)] = w;
        }
    }
    let row_sums = DVector::from_iterator(n, gram.row_iter().map(|r| r.sum()));
    if let Some(i) = row_sums.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(IbrError::InvalidInput(format!(
            "kernel row {} sums to {}; bandwidths are invalid",
            i + 1,
            row_sums[i]
        )));
    }
    let mut matrix = gram.clone();
    for (i, mut row) in matrix.row_iter_mut().enumerate() {
        row /= row_sums[i];
    }
    Ok(KernelSmoother { design: x.clone(), spec, gram, row_sums, matrix })
}

impl KernelSmoother {
    pub fn spec(&self) -> &KernelSmootherSpec {
        &self.spec
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn row_sums(&self) -> &DVector<f64> {
        &self.row_sums
    }

    /// Normalized kernel weights of the training points seen from `point`.
    pub fn weights_at(&self, point: &[f64]) -> Result<DVector<f64>> {
        kernel_weights(&self.design, &self.spec.bandwidths, self.spec.kind, point)
    }
}

pub(crate) fn kernel_weights(
    design: &DesignMatrix,
    bandwidths: &[f64],
    kind: KernelKind,
    point: &[f64],
) -> Result<DVector<f64>> {
    if point.len() != design.d() {
        return Err(IbrError::InvalidInput(format!(
            "point has {} coordinates, expected {}",
            point.len(),
            design.d()
        )));
    }
    let mut w = DVector::from_iterator(
        design.n(),
        design.rows().iter().map(|row| product_kernel(point, row, bandwidths, kind)),
    );
    let total = w.sum();
    if !(total > 0.0) {
        return Err(IbrError::OutsideSupport(format!("{point:?}")));
    }
    w /= total;
    Ok(w)
}

/// Trace of the univariate row-normalized kernel smoother with bandwidth `h`.
pub(crate) fn univariate_trace(column: &[f64], kind: KernelKind, h: f64) -> f64 {
    let k0 = kernel_value(0.0, kind);
    column
        .iter()
        .map(|xi| {
            let s: f64 = column.iter().map(|xj| kernel_value((xi - xj) / h, kind)).sum();
            k0 / s
        })
        .sum()
}

fn product_trace(x: &DesignMatrix, kind: KernelKind, h: &[f64]) -> f64 {
    let rows = x.rows();
    let k0 = kernel_value(0.0, kind).powi(x.d() as i32);
    rows.iter()
        .map(|ri| {
            let s: f64 = rows.iter().map(|rj| product_kernel(ri, rj, h, kind)).sum();
            k0 / s
        })
        .sum()
}

fn range_of(values: &[f64]) -> f64 {
    let (lo, hi) =
        values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    hi - lo
}

/// Solves `trace(scale) = target` on a log scale, where the trace decreases
/// as the scale grows. Starts from `[lo, hi]` and widens geometrically.
fn solve_decreasing_trace<F>(mut trace: F, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut expansions = 0;
    loop {
        let (t_lo, t_hi) = (trace(lo), trace(hi));
        if t_lo >= target && t_hi <= target {
            break;
        }
        if expansions == MAX_BRACKET_EXPANSIONS {
            return Err(IbrError::Calibration(format!(
                "target df {target} not bracketed: trace({lo:.3e}) = {t_lo:.6}, trace({hi:.3e}) = {t_hi:.6}"
            )));
        }
        if t_lo < target {
            lo /= 10.0;
        }
        if t_hi > target {
            hi *= 10.0;
        }
        expansions += 1;
    }
    let log_h = brent_root(|t| trace(t.exp()) - target, lo.ln(), hi.ln(), 1e-13, 500)
        .ok_or_else(|| IbrError::Calibration("root finder failed".into()))?;
    let h = log_h.exp();
    let achieved = trace(h);
    if (achieved - target).abs() > tol {
        return Err(IbrError::Calibration(format!("achieved df {achieved} differs from target {target}")));
    }
    Ok(h)
}

/// Finds the bandwidth giving the univariate smoother on `column` trace
/// `df_target`.
pub fn calibrate_bandwidth(column: &[f64], kind: KernelKind, df_target: f64) -> Result<f64> {
    let n = column.len() as f64;
    if !(df_target > 1.0 && df_target < n) {
        return Err(IbrError::InvalidInput(format!("df target {df_target} must lie in (1, {n})")));
    }
    let range = range_of(column);
    if !(range > 0.0) {
        return Err(IbrError::InvalidInput("cannot calibrate a constant column".into()));
    }
    // Non-gaussian kernels give a piecewise trace; accept a looser match.
    let tol = if kind == KernelKind::Gaussian { 1e-6 } else { 1e-3 };
    solve_decreasing_trace(|h| univariate_trace(column, kind, h), df_target, 1e-3 * range, 1e3 * range, tol)
}

/// Column standard deviations, used as relative bandwidth scales.
fn column_scales(x: &DesignMatrix) -> Result<Vec<f64>> {
    (0..x.d())
        .map(|j| {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            if var > 0.0 {
                Ok(var.sqrt())
            } else {
                Err(IbrError::InvalidInput(format!("column '{}' is constant", x.names()[j])))
            }
        })
        .collect()
}

/// Bandwidths `h_j = c * sd_j` with `c` chosen so the full product smoother
/// has trace `total_df`.
pub fn calibrate_total_df(x: &DesignMatrix, kind: KernelKind, total_df: f64) -> Result<Vec<f64>> {
    let n = x.n() as f64;
    if !(total_df > 1.0 && total_df < n) {
        return Err(IbrError::InvalidInput(format!("total df {total_df} must lie in (1, {n})")));
    }
    let scales = column_scales(x)?;
    let spread = (0..x.d())
        .map(|j| {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            range_of(&col) / scales[j]
        })
        .fold(0.0, f64::max);
    let tol = if kind == KernelKind::Gaussian { 1e-6 } else { 1e-3 };
    let c = solve_decreasing_trace(
        |c| {
            let h: Vec<f64> = scales.iter().map(|s| c * s).collect();
            product_trace(x, kind, &h)
        },
        total_df,
        1e-3 * spread,
        1e3 * spread,
        tol,
    )?;
    Ok(scales.iter().map(|s| c * s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values_at_reference_points() {
        assert!((kernel_value(0.0, KernelKind::Gaussian) - 0.398_942_3).abs() < 1e-7);
        assert_eq!(kernel_value(0.3, KernelKind::Uniform), 0.5);
        assert_eq!(kernel_value(1.5, KernelKind::Epanechnikov), 0.0);
        assert_eq!(kernel_value(-0.25, KernelKind::Triangle), 0.75);
    }

    #[test]
    fn kernels_are_symmetric_densities() {
        let kinds = [
            KernelKind::Gaussian,
            KernelKind::Triangle,
            KernelKind::Quartic,
            KernelKind::Epanechnikov,
            KernelKind::Uniform,
        ];
        for kind in kinds {
            // midpoint rule on [-10, 10]
            let steps = 200_000;
            let dx = 20.0 / steps as f64;
            let integral: f64 =
                (0..steps).map(|i| kernel_value(-10.0 + (i as f64 + 0.5) * dx, kind) * dx).sum();
            assert!((integral - 1.0).abs() < 1e-6, "{kind:?} integrates to {integral}");
            for u in [0.1, 0.7, 1.3, 2.5] {
                assert_eq!(kernel_value(u, kind), kernel_value(-u, kind));
                assert!(kernel_value(u, kind) >= 0.0);
            }
        }
    }

    #[test]
    fn positive_definite_tags() {
        assert!(KernelKind::Gaussian.positive_definite());
        assert!(KernelKind::Triangle.positive_definite());
        assert!(!KernelKind::Quartic.positive_definite());
        assert!(!KernelKind::Epanechnikov.positive_definite());
        assert!(!KernelKind::Uniform.positive_definite());
        assert_eq!(KernelKind::from_tag("q").unwrap(), KernelKind::Quartic);
        assert!(KernelKind::from_tag("z").is_err());
    }

    #[test]
    fn two_point_smoother_rows() {
        let x = DesignMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let s =
            build_kernel_smoother(&x, KernelSmootherSpec::manual(KernelKind::Gaussian, vec![1.0])).unwrap();
        let k0 = kernel_value(0.0, KernelKind::Gaussian);
        let k1 = kernel_value(1.0, KernelKind::Gaussian);
        assert!((s.matrix[(0, 0)] - k0 / (k0 + k1)).abs() < 1e-15);
        assert!((s.matrix[(0, 0)] - 0.62246).abs() < 1e-5);
        assert!((s.matrix[(0, 1)] - 0.37754).abs() < 1e-5);
    }

    #[test]
    fn huge_bandwidth_averages_everything() {
        let x = DesignMatrix::from_rows(&[vec![0.0], vec![0.4], vec![1.0], vec![3.0]]).unwrap();
        let s =
            build_kernel_smoother(&x, KernelSmootherSpec::manual(KernelKind::Gaussian, vec![1e8])).unwrap();
        for v in s.matrix.iter() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_calibration_closed_form() {
        let h = calibrate_bandwidth(&[0.0, 1.0], KernelKind::Gaussian, 1.5).unwrap();
        let expected = 1.0 / (2.0 * 3f64.ln()).sqrt();
        assert!((h - expected).abs() < 1e-9, "{h} vs {expected}");
        assert!((h - 0.674_626).abs() < 1e-6);
    }

    #[test]
    fn calibration_near_interpolation_gives_tiny_bandwidth() {
        let h = calibrate_bandwidth(&[0.0, 1.0], KernelKind::Gaussian, 1.999).unwrap();
        assert!(h < 0.3);
        let h2 = calibrate_bandwidth(&[0.0, 1.0], KernelKind::Gaussian, 1.999_999).unwrap();
        assert!(h2 < h);
    }

    #[test]
    fn calibration_rejects_open_interval_bounds() {
        assert!(calibrate_bandwidth(&[0.0, 1.0, 2.0], KernelKind::Gaussian, 3.0).is_err());
        assert!(calibrate_bandwidth(&[0.0, 1.0, 2.0], KernelKind::Gaussian, 1.0).is_err());
        assert!(calibrate_bandwidth(&[1.0, 1.0, 1.0], KernelKind::Gaussian, 1.5).is_err());
    }

    #[test]
    fn total_df_on_grid() {
        let rows: Vec<Vec<f64>> =
            (0..10).flat_map(|i| (0..2).map(move |j| vec![i as f64, j as f64])).collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let h = calibrate_total_df(&x, KernelKind::Gaussian, 3.0).unwrap();
        let s = build_kernel_smoother(&x, KernelSmootherSpec::manual(KernelKind::Gaussian, h)).unwrap();
        assert!((s.matrix.trace() - 3.0).abs() < 1e-4);
    }

    #[test]
    fn total_df_reduces_to_univariate() {
        let col = vec![0.1, 0.5, 0.9, 1.7, 2.0, 3.1, 3.3];
        let x = DesignMatrix::from_rows(&col.iter().map(|v| vec![*v]).collect::<Vec<_>>()).unwrap();
        let h_total = calibrate_total_df(&x, KernelKind::Gaussian, 2.5).unwrap()[0];
        let h_uni = calibrate_bandwidth(&col, KernelKind::Gaussian, 2.5).unwrap();
        assert!((h_total - h_uni).abs() / h_uni < 1e-6);
    }

    #[test]
    fn weights_far_outside_compact_support_fail() {
        let x = DesignMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let s = build_kernel_smoother(&x, KernelSmootherSpec::manual(KernelKind::Epanechnikov, vec![0.8]))
            .unwrap();
        assert!(matches!(s.weights_at(&[10.0]), Err(IbrError::OutsideSupport(_))));
        let w = s.weights_at(&[0.5]).unwrap();
        assert!((w.sum() - 1.0).abs() < 1e-15);
    }
}
