//! Reproducible benchmark experiments.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::engine::{fit, IbrFit};
use crate::error::{IbrError, Result};
use crate::selection::SelectionPlan;
use crate::smoother::{DesignMatrix, SmootherConfig};

/// Wendelberger's test surface on the unit square.
pub fn wendelberger(x: f64, y: f64) -> f64 {
    let g1 = 0.75 * (-((9.0 * x - 2.0).powi(2) + (9.0 * y - 2.0).powi(2)) / 4.0).exp();
    let g2 = 0.75 * (-(9.0 * x + 1.0).powi(2) / 49.0 - (9.0 * y + 1.0).powi(2) / 10.0).exp();
    let g3 = 0.5 * (-((9.0 * x - 7.0).powi(2) + (9.0 * y - 3.0).powi(2)) / 4.0).exp();
    let g4 = 0.2 * (-(9.0 * x - 4.0).powi(2) - (9.0 * y - 7.0).powi(2)).exp();
    g1 + g2 + g3 - g4
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[derive(Debug, Clone)]
pub struct WendelbergerSetup {
    /// Design points per axis, placed at cell midpoints.
    pub per_axis: usize,
    /// Noise variance as a fraction of the signal variance.
    pub noise: f64,
    pub seed: u64,
    /// Evaluation grid points per axis.
    pub eval_per_axis: usize,
}

impl Default for WendelbergerSetup {
    fn default() -> Self {
        Self { per_axis: 10, noise: 0.2, seed: 1, eval_per_axis: 50 }
    }
}

/// Regular design grid at cell midpoints, x varying fastest, with the true
/// surface values.
pub fn wendelberger_design(per_axis: usize) -> Result<(DesignMatrix, DVector<f64>)> {
    let m = per_axis;
    if m < 2 {
        return Err(IbrError::InvalidInput("need at least 2 design points per axis".into()));
    }
    let axis: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
    let mut rows = Vec::with_capacity(m * m);
    let mut truth = Vec::with_capacity(m * m);
    for &yv in &axis {
        for &xv in &axis {
            rows.push(vec![xv, yv]);
            truth.push(wendelberger(xv, yv));
        }
    }
    let design =
        DesignMatrix::new(DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]), vec!["x".into(), "y".into()])?;
    Ok((design, DVector::from_vec(truth)))
}

/// Noise standard deviation giving the requested noise-to-signal variance ratio.
pub fn noise_sd(truth: &DVector<f64>, ratio: f64) -> f64 {
    (ratio * sample_variance(truth.as_slice())).sqrt()
}

/// A simulated sample: design, noisy response, true values.
pub fn wendelberger_sample(setup: &WendelbergerSetup) -> Result<(DesignMatrix, DVector<f64>, DVector<f64>)> {
    let (design, truth) = wendelberger_design(setup.per_axis)?;
    let normal =
        Normal::new(0.0, noise_sd(&truth, setup.noise)).map_err(|e| IbrError::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let y = truth.map(|t| t + normal.sample(&mut rng));
    Ok((design, y, truth))
}

/// Evaluation grid `i/(m+1)`, i = 1..m, x varying fastest.
pub fn evaluation_grid(m: usize) -> DMatrix<f64> {
    let step = 1.0 / (m as f64 + 1.0);
    DMatrix::from_fn(m * m, 2, |i, j| {
        let idx = if j == 0 { i % m } else { i / m };
        (idx as f64 + 1.0) * step
    })
}

#[derive(Debug, Clone)]
pub struct WendelbergerOutcome {
    pub fit: IbrFit,
    pub mae: f64,
    pub grid: DMatrix<f64>,
    pub predictions: DVector<f64>,
}

pub fn run_wendelberger(
    setup: &WendelbergerSetup,
    config: &SmootherConfig,
    plan: &SelectionPlan,
) -> Result<WendelbergerOutcome> {
    let (design, y, _) = wendelberger_sample(setup)?;
    fit_wendelberger(&design, &y, config, plan, setup.eval_per_axis)
}

/// Fits the given sample and scores it against the true surface.
pub fn fit_wendelberger(
    design: &DesignMatrix,
    y: &DVector<f64>,
    config: &SmootherConfig,
    plan: &SelectionPlan,
    eval_per_axis: usize,
) -> Result<WendelbergerOutcome> {
    let fitted = fit(design, y, config, plan)?;
    let grid = evaluation_grid(eval_per_axis);
    let predictions = fitted.predict(&grid)?;
    let mae = (0..grid.nrows())
        .map(|i| (predictions[i] - wendelberger(grid[(i, 0)], grid[(i, 1)])).abs())
        .sum::<f64>()
        / grid.nrows() as f64;
    Ok(WendelbergerOutcome { fit: fitted, mae, grid, predictions })
}

/// Indices of one random train/test split of `n` rows.
pub fn random_split(n: usize, ntest: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = sample(&mut rng, n, ntest).into_vec();
    test.sort_unstable();
    let train = (0..n).filter(|i| test.binary_search(i).is_err()).collect();
    (train, test)
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub k: f64,
    pub final_df: f64,
    pub squared_errors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SplitBenchmark {
    pub splits: Vec<SplitOutcome>,
    /// Mean squared prediction error pooled over all held-out points.
    pub pooled_mse: f64,
}

/// Repeated random-split prediction error; split `i` uses seed `seed + i`.
pub fn run_split_benchmark(
    design: &DesignMatrix,
    y: &DVector<f64>,
    config: &SmootherConfig,
    plan: &SelectionPlan,
    repeats: usize,
    ntest: usize,
    seed: u64,
) -> Result<SplitBenchmark> {
    let n = design.n();
    if ntest == 0 || ntest >= n {
        return Err(IbrError::InvalidInput(format!("test size {ntest} must lie in 1..{n}")));
    }
    let splits = (0..repeats)
        .into_par_iter()
        .map(|i| {
            let (train, test) = random_split(n, ntest, seed.wrapping_add(i as u64));
            let xtr = design.select_rows(&train)?;
            let ytr = DVector::from_iterator(train.len(), train.iter().map(|&r| y[r]));
            let model = fit(&xtr, &ytr, config, plan)?;
            let xte = design.select_rows(&test)?;
            let pred = model.predict(xte.matrix())?;
            let squared_errors = test.iter().zip(pred.iter()).map(|(&r, p)| (y[r] - p).powi(2)).collect();
            Ok(SplitOutcome { k: model.k, final_df: model.final_df, squared_errors })
        })
        .collect::<Result<Vec<_>>>()?;
    let total: usize = splits.iter().map(|s| s.squared_errors.len()).sum();
    let pooled_mse = splits.iter().flat_map(|s| s.squared_errors.iter()).sum::<f64>() / total as f64;
    Ok(SplitBenchmark { splits, pooled_mse })
}
