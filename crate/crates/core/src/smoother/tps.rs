//! Thin-plate spline smoothers.
//!
//! For a penalty weight `lambda` the fitted values solve the saddle system
//!
//! ```text
//! (E + n lambda I) delta + T theta = y,     T' delta = 0,
//! ```
//!
//! with `E_ij = eta(|x_i - x_j|)` the thin-plate radial basis and `T` the
//! monomials of total degree below the order. Writing `T = [Q1 Q2] [R; 0]`
//! and `Q2' E Q2 = V diag(gamma) V'`, the smoothing matrix is
//! `Q1 Q1' + Q2 V diag(gamma / (gamma + n lambda)) V' Q2'`, so every
//! quantity for any `lambda` follows from one eigendecomposition.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{DesignMatrix, SpectralForm};
use crate::error::{IbrError, Result};
use crate::numeric::brent_root;

/// `C(n, k)` for small arguments.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Dimension of the polynomial null space: `C(order + d - 1, order - 1)`.
pub fn null_space_dim(order: usize, d: usize) -> usize {
    binomial(order + d - 1, order - 1)
}

/// Smallest order with `2 * order > d` (and at least 2).
pub fn default_order(d: usize) -> usize {
    (d / 2 + 1).max(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpsSpec {
    pub order: usize,
    pub null_dim: usize,
    pub lambda: f64,
    /// Requested trace as a multiple of `null_dim`, when calibrated.
    pub df_multiplier: Option<f64>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Gamma function at a half-integer `m / 2` with `m` odd (may be negative).
fn gamma_half_integer(twice: i64) -> f64 {
    // start at Gamma(1/2) = sqrt(pi) and step by one
    let mut x = 0.5;
    let mut g = PI.sqrt();
    let target = twice as f64 / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    while x > target {
        x -= 1.0;
        g /= x;
    }
    g
}

/// Scaling constant of the order-`m` thin-plate radial basis in dimension `d`.
pub fn radial_constant(m: usize, d: usize) -> f64 {
    if d.is_multiple_of(2) {
        let sign = if (m + 1 + d / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        sign / (2f64.powi((2 * m - 1) as i32)
            * PI.powi((d / 2) as i32)
            * factorial(m - 1)
            * factorial(m - d / 2))
    } else {
        gamma_half_integer(d as i64 - 2 * m as i64)
            / (2f64.powi((2 * m) as i32) * PI.powf(d as f64 / 2.0) * factorial(m - 1))
    }
}

/// Thin-plate radial basis `eta(r)` for order `m` in dimension `d`.
pub fn radial_basis(r: f64, m: usize, d: usize) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let p = (2 * m - d) as i32;
    let c = radial_constant(m, d);
    if d.is_multiple_of(2) {
        c * r.powi(p) * r.ln()
    } else {
        c * r.powi(p)
    }
}

/// Exponent tuples of all monomials of total degree below `order`,
/// constant term first.
pub fn monomial_exponents(order: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=remaining {
            prefix.push(e);
            rec(d, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for degree in 0..order {
        let mut all = Vec::new();
        rec(d, degree, &mut Vec::new(), &mut all);
        let mut exact: Vec<_> = all.into_iter().filter(|e| e.iter().sum::<usize>() == degree).collect();
        exact.reverse();
        out.extend(exact);
    }
    out
}

fn monomials(point: &[f64], exponents: &[Vec<usize>]) -> DVector<f64> {
    DVector::from_iterator(
        exponents.len(),
        exponents.iter().map(|e| point.iter().zip(e).map(|(x, p)| x.powi(*p as i32)).product::<f64>()),
    )
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Lambda-independent pieces of a thin-plate smoother.
#[derive(Debug, Clone)]
pub(crate) struct TpsBasis {
    design: DesignMatrix,
    order: usize,
    exponents: Vec<Vec<usize>>,
    radial: DMatrix<f64>,
    q1: DMatrix<f64>,
    r: DMatrix<f64>,
    /// `Q2 V`, columns ordered by descending `gamma`.
    w: DMatrix<f64>,
    gamma: DVector<f64>,
}

impl TpsBasis {
    pub(crate) fn new(x: &DesignMatrix, order: usize) -> Result<Self> {
        let (n, d) = (x.n(), x.d());
        if 2 * order <= d || order < 1 {
            return Err(IbrError::InvalidInput(format!(
                "thin-plate order {order} must exceed d/2 = {}",
                d as f64 / 2.0
            )));
        }
        let m0 = null_space_dim(order, d);
        if m0 >= n {
            return Err(IbrError::InvalidInput(format!(
                "null space dimension {m0} is not below the sample size {n}"
            )));
        }
        let rows = x.rows();
        for i in 0..n {
            for j in 0..i {
                if rows[i] == rows[j] {
                    return Err(IbrError::InvalidInput(format!(
                        "thin-plate splines need distinct points; rows {} and {} coincide",
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        let exponents = monomial_exponents(order, d);
        let mut t = DMatrix::zeros(n, m0);
        for (i, row) in rows.iter().enumerate() {
            t.set_row(i, &monomials(row, &exponents).transpose());
        }
        let mut radial = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                let e = radial_basis(distance(&rows[i], &rows[j]), order, d);
                radial[(i, j)] = e;
                radial[(j, i)] = e;
            }
        }

        let qr = t.clone().qr();
        let r = qr.r();
        let max_diag = r.diagonal().abs().max();
        if r.diagonal().iter().any(|v| v.abs() <= 1e-10 * max_diag.max(1.0)) {
            return Err(IbrError::InvalidInput(
                "polynomial design block is rank deficient (points not in general position)".into(),
            ));
        }
        let mut qt = DMatrix::identity(n, n);
        qr.q_tr_mul(&mut qt);
        let q = qt.transpose();
        let q1 = q.columns(0, m0).into_owned();
        let q2 = q.columns(m0, n - m0).into_owned();

        let b = q2.transpose() * &radial * &q2;
        let b = (&b + b.transpose()) * 0.5;
        let eig = SymmetricEigen::try_new(b, 1e-14, 0)
            .ok_or_else(|| IbrError::Decomposition("thin-plate energy matrix".into()))?;
        let mut order_idx: Vec<usize> = (0..n - m0).collect();
        order_idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let gamma = DVector::from_iterator(n - m0, order_idx.iter().map(|&i| eig.eigenvalues[i]));
        let min_gamma = gamma.min();
        if !(min_gamma > 0.0) {
            return Err(IbrError::Decomposition(format!(
                "thin-plate energy is not positive on the null-space complement (min eigenvalue {min_gamma:.3e})"
            )));
        }
        let mut v = DMatrix::zeros(n - m0, n - m0);
        for (c, &i) in order_idx.iter().enumerate() {
            v.set_column(c, &eig.eigenvectors.column(i));
        }
        let w = &q2 * v;
        Ok(Self { design: x.clone(), order, exponents, radial, q1, r, w, gamma })
    }

    fn null_dim(&self) -> usize {
        self.q1.ncols()
    }

    /// Trace of the smoother for penalty `lambda`.
    pub(crate) fn trace(&self, lambda: f64) -> f64 {
        let nl = self.design.n() as f64 * lambda;
        self.null_dim() as f64 + self.gamma.iter().map(|g| g / (g + nl)).sum::<f64>()
    }

    pub(crate) fn smoother(self, lambda: f64, df_multiplier: Option<f64>) -> Result<TpsSmoother> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(IbrError::InvalidInput(format!("lambda {lambda} must be finite and >= 0")));
        }
        let n = self.design.n();
        let nl = n as f64 * lambda;
        let shrink = self.gamma.map(|g| g / (g + nl));
        let inv = self.gamma.map(|g| 1.0 / (g + nl));

        let scaled = |diag: &DVector<f64>| {
            let mut wd = self.w.clone();
            for (c, mut col) in wd.column_iter_mut().enumerate() {
                col *= diag[c];
            }
            &wd * self.w.transpose()
        };
        let mut matrix = &self.q1 * self.q1.transpose() + scaled(&shrink);
        matrix = (&matrix + matrix.transpose()) * 0.5;
        let radial_map = scaled(&inv);

        // theta = R^-1 Q1' (I - (E + n lambda I) C) y
        let mut h = DMatrix::identity(n, n) - &self.radial * &radial_map;
        h -= &radial_map * nl;
        let rhs = self.q1.transpose() * h;
        let poly_map = self
            .r
            .clone()
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| IbrError::Decomposition("singular polynomial block".into()))?;

        let mut lambdas = DVector::from_element(n, 1.0);
        lambdas.rows_mut(self.null_dim(), n - self.null_dim()).copy_from(&shrink);
        let mut u = DMatrix::zeros(n, n);
        u.columns_mut(0, self.null_dim()).copy_from(&self.q1);
        u.columns_mut(self.null_dim(), n - self.null_dim()).copy_from(&self.w);
        let spectral = SpectralForm::new(DVector::from_element(n, 1.0), u, lambdas);

        let spec = TpsSpec { order: self.order, null_dim: self.null_dim(), lambda, df_multiplier };
        Ok(TpsSmoother {
            design: self.design,
            spec,
            exponents: self.exponents,
            matrix,
            radial_map,
            poly_map,
            spectral,
        })
    }
}

/// A thin-plate smoother with fixed penalty.
#[derive(Debug, Clone)]
pub struct TpsSmoother {
    pub(crate) design: DesignMatrix,
    pub(crate) spec: TpsSpec,
    pub(crate) exponents: Vec<Vec<usize>>,
    pub(crate) matrix: DMatrix<f64>,
    /// `delta = radial_map * y`
    pub(crate) radial_map: DMatrix<f64>,
    /// `theta = poly_map * y`
    pub(crate) poly_map: DMatrix<f64>,
    pub(crate) spectral: SpectralForm,
}

/// Builds a thin-plate smoother of the given order and penalty.
pub fn build_tps_smoother(x: &DesignMatrix, order: usize, lambda: f64) -> Result<TpsSmoother> {
    TpsBasis::new(x, order)?.smoother(lambda, None)
}

/// Penalty such that the smoother's trace equals `df_multiplier * M0`.
pub fn calibrate_tps_lambda(x: &DesignMatrix, order: usize, df_multiplier: f64) -> Result<f64> {
    let basis = TpsBasis::new(x, order)?;
    solve_lambda(&basis, df_multiplier)
}

fn solve_lambda(basis: &TpsBasis, df_multiplier: f64) -> Result<f64> {
    let m0 = basis.null_dim() as f64;
    let n = basis.design.n() as f64;
    let target = df_multiplier * m0;
    if !(target > m0 && target < n) {
        return Err(IbrError::InvalidInput(format!("thin-plate df target {target} must lie in ({m0}, {n})")));
    }
    // search over t = ln(n lambda), bracketed by the gamma spectrum
    let g_max = basis.gamma.max();
    let g_min = basis.gamma.min();
    let lo = g_min.ln() - 40.0;
    let hi = g_max.ln() + 40.0;
    let t = brent_root(|t| basis.trace(t.exp() / n) - target, lo, hi, 1e-14, 500)
        .ok_or_else(|| IbrError::Calibration(format!("thin-plate df target {target} not bracketed")))?;
    let lambda = t.exp() / n;
    let achieved = basis.trace(lambda);
    if (achieved - target).abs() > 1e-6 {
        return Err(IbrError::Calibration(format!("thin-plate trace {achieved} misses target {target}")));
    }
    Ok(lambda)
}

/// Builds a thin-plate smoother whose trace is `df_multiplier * M0`.
pub fn build_calibrated_tps(x: &DesignMatrix, order: usize, df_multiplier: f64) -> Result<TpsSmoother> {
    let basis = TpsBasis::new(x, order)?;
    let lambda = solve_lambda(&basis, df_multiplier)?;
    basis.smoother(lambda, Some(df_multiplier))
}

impl TpsSmoother {
    pub fn spec(&self) -> &TpsSpec {
        &self.spec
    }

    pub fn radial_map(&self) -> &DMatrix<f64> {
        &self.radial_map
    }

    pub fn poly_map(&self) -> &DMatrix<f64> {
        &self.poly_map
    }

    pub(crate) fn radial_row(&self, point: &[f64]) -> DVector<f64> {
        tps_radial_row(&self.design, self.spec.order, point)
    }

    pub(crate) fn monomials(&self, point: &[f64]) -> DVector<f64> {
        monomials(point, &self.exponents)
    }

    /// Linear functional giving the fitted spline at `point`.
    pub fn weights_at(&self, point: &[f64]) -> Result<DVector<f64>> {
        if point.len() != self.design.d() {
            return Err(IbrError::InvalidInput(format!(
                "point has {} coordinates, expected {}",
                point.len(),
                self.design.d()
            )));
        }
        let eta = self.radial_row(point);
        let phi = self.monomials(point);
        Ok(self.radial_map.tr_mul(&eta) + self.poly_map.tr_mul(&phi))
    }
}

pub(crate) fn tps_radial_row(design: &DesignMatrix, order: usize, point: &[f64]) -> DVector<f64> {
    let d = design.d();
    DVector::from_iterator(
        design.n(),
        design.rows().iter().map(|row| radial_basis(distance(point, row), order, d)),
    )
}

pub(crate) fn tps_monomials(order: usize, d: usize, point: &[f64]) -> DVector<f64> {
    monomials(point, &monomial_exponents(order, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(k: usize) -> DesignMatrix {
        let rows: Vec<Vec<f64>> = (0..k)
            .flat_map(|j| (0..k).map(move |i| vec![0.05 + 0.1 * i as f64, 0.05 + 0.1 * j as f64]))
            .collect();
        DesignMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn null_space_dimensions() {
        assert_eq!(null_space_dim(2, 2), 3);
        assert_eq!(null_space_dim(2, 1), 2);
        assert_eq!(null_space_dim(3, 2), 6);
        assert_eq!(null_space_dim(5, 8), 495);
        assert_eq!(monomial_exponents(3, 2).len(), 6);
        assert_eq!(default_order(2), 2);
        assert_eq!(default_order(3), 2);
        assert_eq!(default_order(4), 3);
        assert_eq!(default_order(8), 5);
    }

    #[test]
    fn radial_constants_match_classical_forms() {
        assert!((radial_constant(2, 2) - 1.0 / (8.0 * PI)).abs() < 1e-15);
        assert!((radial_constant(2, 1) - 1.0 / 12.0).abs() < 1e-15);
        assert!((radial_constant(2, 3) + 1.0 / (8.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn zero_penalty_interpolates() {
        let x = grid(5);
        let s = build_tps_smoother(&x, 2, 0.0).unwrap();
        let id = DMatrix::<f64>::identity(25, 25);
        assert!((&s.matrix - &id).abs().max() < 1e-8);
        assert!(s.spectral.lambda().iter().all(|l| (l - 1.0).abs() < 1e-8));
        let w = s.weights_at(&x.rows()[2]).unwrap();
        let mut e3 = DVector::zeros(25);
        e3[2] = 1.0;
        assert!((w - e3).abs().max() < 1e-8);
    }

    #[test]
    fn huge_penalty_projects_on_polynomials() {
        let x = grid(5);
        let s = build_tps_smoother(&x, 2, 1e12).unwrap();
        assert!((s.matrix.trace() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn calibrated_trace_on_reference_grid() {
        let s = build_calibrated_tps(&grid(10), 2, 1.1).unwrap();
        assert!((s.matrix.trace() - 3.3).abs() < 1e-4);
        let ones = s.spectral.lambda().iter().filter(|l| (*l - 1.0).abs() < 1e-8).count();
        assert_eq!(ones, 3);
    }

    #[test]
    fn trace_decreases_with_penalty() {
        let basis = TpsBasis::new(&grid(6), 2).unwrap();
        let traces: Vec<f64> = [1e-8, 1e-6, 1e-4, 1e-2, 1.0].iter().map(|l| basis.trace(*l)).collect();
        for w in traces.windows(2) {
            assert!(w[0] > w[1]);
        }
        assert!(traces.iter().all(|t| *t > 3.0 && *t < 36.0));
    }

    #[test]
    fn rejects_bad_configurations() {
        let x = grid(4);
        assert!(build_tps_smoother(&x, 1, 0.1).is_err());
        let collinear =
            DesignMatrix::from_rows(&(0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect::<Vec<_>>())
                .unwrap();
        assert!(build_tps_smoother(&collinear, 2, 0.1).is_err());
        let dup = DesignMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]])
            .unwrap();
        assert!(build_tps_smoother(&dup, 2, 0.1).is_err());
        assert!(calibrate_tps_lambda(&x, 2, 1.0).is_err());
        assert!(calibrate_tps_lambda(&x, 2, 16.0 / 3.0).is_err());
    }

    #[test]
    fn weights_reproduce_matrix_rows() {
        let x = grid(5);
        let s = build_tps_smoother(&x, 2, 1e-3).unwrap();
        for j in [0, 7, 24] {
            let w = s.weights_at(&x.rows()[j]).unwrap();
            let row = s.matrix.row(j).transpose();
            assert!((w - row).abs().max() < 1e-8);
        }
    }
}
