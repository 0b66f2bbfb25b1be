//! Base smoothers: product-kernel and thin-plate spline smoothing matrices,
//! their calibration, spectral decomposition, and prediction weights.

pub mod kernel;
pub mod tps;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{IbrError, Result};

pub use kernel::{
    build_kernel_smoother, calibrate_bandwidth, calibrate_total_df, kernel_value, DfTarget, KernelKind,
    KernelSmoother, KernelSmootherSpec,
};
pub use tps::{
    build_calibrated_tps, build_tps_smoother, calibrate_tps_lambda, default_order, null_space_dim,
    TpsSmoother, TpsSpec,
};

/// Eigenvalues within this distance of `[0, 1]` are treated as inside it.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

/// Covariate rows `X_i` in `R^d` with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    data: DMatrix<f64>,
    rows: Vec<Vec<f64>>,
    names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(data: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let (n, d) = data.shape();
        if n < 2 || d < 1 {
            return Err(IbrError::InvalidInput(format!("design needs n >= 2 and d >= 1, got {n}x{d}")));
        }
        if names.len() != d {
            return Err(IbrError::InvalidInput(format!("{} column names for {d} columns", names.len())));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(IbrError::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos % n + 1,
                pos / n + 1
            )));
        }
        let rows = data.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(Self { data, rows, names })
    }

    /// Builds a design from rows, naming columns `x1, x2, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(IbrError::InvalidInput("ragged rows".into()));
        }
        let data = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(data, (1..=d).map(|j| format!("x{j}")).collect())
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> nalgebra::DVectorView<'_, f64> {
        self.data.column(j)
    }

    /// Keeps only the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let data = DMatrix::from_fn(idx.len(), self.d(), |i, j| self.data[(idx[i], j)]);
        Self::new(data, self.names.clone())
    }

    /// Keeps only the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let data = DMatrix::from_fn(self.n(), cols.len(), |i, j| self.data[(i, cols[j])]);
        Self::new(data, cols.iter().map(|&c| self.names[c].clone()).collect())
    }
}

/// Symmetrized eigensystem of a smoothing matrix:
/// `S = D^{1/2} U diag(lambda) U' D^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralForm {
    d_half: DVector<f64>,
    u: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl SpectralForm {
    /// Eigenpairs are sorted by descending eigenvalue.
    pub fn new(d_half: DVector<f64>, u: DMatrix<f64>, lambda: DVector<f64>) -> Self {
        let n = lambda.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]));
        let lambda_sorted = DVector::from_iterator(n, order.iter().map(|&i| lambda[i]));
        let mut u_sorted = DMatrix::zeros(u.nrows(), n);
        for (c, &i) in order.iter().enumerate() {
            u_sorted.set_column(c, &u.column(i));
        }
        Self { d_half, u: u_sorted, lambda: lambda_sorted }
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn d_half(&self) -> &DVector<f64> {
        &self.d_half
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    /// True when `D = I`, i.e. the smoothing matrix itself is symmetric.
    pub fn is_symmetric(&self) -> bool {
        self.d_half.iter().all(|v| *v == 1.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.lambda.min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.lambda.max()
    }

    /// Number of eigenvalues at or below zero.
    pub fn non_positive_count(&self) -> usize {
        self.lambda.iter().filter(|l| **l <= 0.0).count()
    }

    /// Whether `(1 - lambda)^k` is defined for real `k`.
    pub fn supports_real_k(&self) -> bool {
        self.min_eigenvalue() >= -EIGEN_TOLERANCE && self.max_eigenvalue() <= 1.0 + EIGEN_TOLERANCE
    }

    /// `D^{1/2} U diag(lambda) U' D^{-1/2}`
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.reconstruct_with(&self.lambda)
    }

    pub(crate) fn reconstruct_with(&self, diag: &DVector<f64>) -> DMatrix<f64> {
        let mut left = self.u.clone();
        for (c, mut col) in left.column_iter_mut().enumerate() {
            col *= diag[c];
        }
        let mut m = left * self.u.transpose();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                m[(i, j)] *= self.d_half[i] / self.d_half[j];
            }
        }
        m
    }
}

/// A calibrated base smoother.
#[derive(Debug, Clone)]
pub enum BaseSmoother {
    Kernel(KernelSmoother),
    Tps(TpsSmoother),
}

impl BaseSmoother {
    pub fn matrix(&self) -> &DMatrix<f64> {
        match self {
            Self::Kernel(k) => &k.matrix,
            Self::Tps(t) => &t.matrix,
        }
    }

    pub fn design(&self) -> &DesignMatrix {
        match self {
            Self::Kernel(k) => &k.design,
            Self::Tps(t) => &t.design,
        }
    }

    pub fn n(&self) -> usize {
        self.design().n()
    }

    /// Effective degrees of freedom of the base smoother.
    pub fn trace(&self) -> f64 {
        self.matrix().trace()
    }

    /// Whether the spectrum is guaranteed to lie in `(0, 1]`.
    pub fn positive_definite(&self) -> bool {
        match self {
            Self::Kernel(k) => k.spec.kind.positive_definite(),
            Self::Tps(_) => true,
        }
    }

    /// Prediction weights `S(x)` at an arbitrary point.
    pub fn weights_at(&self, point: &[f64]) -> Result<DVector<f64>> {
        if point.iter().any(|v| !v.is_finite()) {
            return Err(IbrError::InvalidInput(format!("non-finite point {point:?}")));
        }
        match self {
            Self::Kernel(k) => k.weights_at(point),
            Self::Tps(t) => t.weights_at(point),
        }
    }

    /// Eigendecomposition of the symmetrized smoother.
    pub fn spectral_decompose(&self) -> Result<SpectralForm> {
        spectral_decompose(self)
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Kernel(k) => format!("{} kernel (with {:.4} df)", k.spec.kind.name(), self.trace()),
            Self::Tps(t) => {
                format!("Thin plate spline of order {} (with {:.4} df)", t.spec.order, self.trace())
            }
        }
    }
}

/// Decomposes `A = D^{1/2} K D^{1/2}` for kernel smoothers; thin-plate
/// smoothers carry their eigensystem from construction.
pub fn spectral_decompose(s: &BaseSmoother) -> Result<SpectralForm> {
    match s {
        BaseSmoother::Tps(t) => Ok(t.spectral.clone()),
        BaseSmoother::Kernel(k) => {
            let n = k.gram.nrows();
            let d_half = k.row_sums.map(|s| 1.0 / s.sqrt());
            let mut a = k.gram.clone();
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] *= d_half[i] * d_half[j];
                }
            }
            let a = (&a + a.transpose()) * 0.5;
            let eig = SymmetricEigen::try_new(a, 1e-15, 0).ok_or_else(|| {
                let min_rs = k.row_sums.min();
                let max_rs = k.row_sums.max();
                IbrError::Decomposition(format!(
                    "symmetric eigensolver did not converge (n = {n}, row sums {min_rs:.3e}..{max_rs:.3e})"
                ))
            })?;
            let form = SpectralForm::new(d_half, eig.eigenvectors, eig.eigenvalues);
            if !form.supports_real_k() {
                log::warn!(
                    "{} kernel spectrum spans [{:.3e}, {:.3e}]; only integer iteration counts are available",
                    k.spec.kind.name(),
                    form.min_eigenvalue(),
                    form.max_eigenvalue()
                );
            }
            Ok(form)
        }
    }
}

/// User-level description of the base smoother, calibrated per dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SmootherConfig {
    Kernel {
        kind: KernelKind,
        /// Per-variable trace, or the total trace when `total` is set.
        df: f64,
        total: bool,
    },
    Tps {
        /// `None` selects the smallest valid order.
        order: Option<usize>,
        /// Trace as a multiple of the null-space dimension.
        df: f64,
    },
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self::Kernel { kind: KernelKind::Gaussian, df: 1.1, total: false }
    }
}

impl SmootherConfig {
    pub fn build(&self, x: &DesignMatrix) -> Result<BaseSmoother> {
        match *self {
            Self::Kernel { kind, df, total } => {
                let spec = if total {
                    KernelSmootherSpec::total(x, kind, df)?
                } else {
                    KernelSmootherSpec::per_variable(x, kind, df)?
                };
                Ok(BaseSmoother::Kernel(build_kernel_smoother(x, spec)?))
            }
            Self::Tps { order, df } => {
                let order = order.unwrap_or_else(|| default_order(x.d()));
                Ok(BaseSmoother::Tps(build_calibrated_tps(x, order, df)?))
            }
        }
    }
}
