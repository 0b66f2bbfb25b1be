//! Data splitting and K-fold cross-validation for choosing `k`.

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::search::SearchOutcome;
use super::{best_of, CriterionKind, Evaluation, SearchMode, SelectionPlan};
use crate::engine::{eigen_coordinates, geometric};
use crate::error::{IbrError, Result};
use crate::numeric::brent_min;
use crate::smoother::{DesignMatrix, SmootherConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitType {
    Random,
    Consecutive,
    Interleaved,
    Timeseries,
}

impl SplitType {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "consecutive" => Ok(Self::Consecutive),
            "interleaved" => Ok(Self::Interleaved),
            "timeseries" => Ok(Self::Timeseries),
            other => Err(IbrError::InvalidInput(format!("unknown split type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Rmse,
    Map,
}

impl Loss {
    pub fn from_criterion(kind: CriterionKind) -> Option<Self> {
        match kind {
            CriterionKind::Rmse => Some(Self::Rmse),
            CriterionKind::Map => Some(Self::Map),
            _ => None,
        }
    }

    fn evaluate(self, errors: impl Iterator<Item = f64>) -> f64 {
        let (mut total, mut count) = (0.0, 0usize);
        for e in errors {
            total += match self {
                Loss::Rmse => e * e,
                Loss::Map => e.abs(),
            };
            count += 1;
        }
        let mean = total / count as f64;
        match self {
            Loss::Rmse => mean.sqrt(),
            Loss::Map => mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    /// `npermut` independent random train/test splits.
    DataSplit,
    /// K-fold; `None` derives `K = floor(n / n_test)`.
    KFold(Option<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub scheme: FoldScheme,
    pub ntest: Option<usize>,
    pub ntrain: Option<usize>,
    pub npermut: usize,
    pub split_type: SplitType,
    pub seed: u64,
    pub loss: Loss,
}

impl CvPlan {
    /// Data splitting with `floor(n/10)` test points, 20 repetitions.
    pub fn for_loss(loss: Loss) -> Self {
        Self {
            scheme: FoldScheme::DataSplit,
            ntest: None,
            ntrain: None,
            npermut: 20,
            split_type: SplitType::Random,
            seed: 1,
            loss,
        }
    }

    pub fn kfold(k: usize, split_type: SplitType, loss: Loss) -> Self {
        Self { scheme: FoldScheme::KFold(Some(k)), split_type, ..Self::for_loss(loss) }
    }

    fn test_size(&self, n: usize) -> Result<usize> {
        let given =
            [self.ntest.is_some(), self.ntrain.is_some(), matches!(self.scheme, FoldScheme::KFold(Some(_)))];
        if given.iter().filter(|g| **g).count() > 1 {
            return Err(IbrError::InvalidInput(
                "set only one of ntest, ntrain and the number of folds".into(),
            ));
        }
        let nv = match (self.ntest, self.ntrain, self.scheme) {
            (Some(t), _, _) => t,
            (_, Some(t), _) => n
                .checked_sub(t)
                .ok_or_else(|| IbrError::InvalidInput(format!("ntrain {t} exceeds n = {n}")))?,
            (_, _, FoldScheme::KFold(Some(k))) => {
                if k < 2 {
                    return Err(IbrError::InvalidInput("need at least 2 folds".into()));
                }
                n / k
            }
            _ => n / 10,
        };
        if nv < 1 || nv >= n {
            return Err(IbrError::InvalidInput(format!("test size {nv} must lie in [1, {n})")));
        }
        Ok(nv)
    }

    fn folds(&self, n: usize) -> Result<usize> {
        match self.scheme {
            FoldScheme::KFold(Some(k)) if k > n => {
                Err(IbrError::InvalidInput(format!("{k} folds for {n} observations")))
            }
            FoldScheme::KFold(Some(k)) => Ok(k),
            _ => Ok(n / self.test_size(n)?),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.test_size(n)?;
        match self.scheme {
            FoldScheme::DataSplit => {
                if self.split_type != SplitType::Random {
                    return Err(IbrError::InvalidInput(
                        "data splitting draws random test sets; use K-fold for other split types".into(),
                    ));
                }
                if self.npermut == 0 {
                    return Err(IbrError::InvalidInput("npermut must be >= 1".into()));
                }
            }
            FoldScheme::KFold(_) => {
                self.folds(n)?;
            }
        }
        Ok(())
    }
}

/// One train/test partition (0-based indices, each sorted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut mask = vec![false; n];
    for &i in test {
        mask[i] = true;
    }
    (0..n).filter(|i| !mask[*i]).collect()
}

fn from_test(n: usize, mut test: Vec<usize>) -> Split {
    test.sort_unstable();
    Split { train: complement(n, &test), test }
}

/// Contiguous blocks of `order`, first `len % k` blocks one longer.
fn blocks(order: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = order.len();
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for j in 0..k {
        let len = base + usize::from(j < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Builds the train/test partitions described by `plan`.
pub fn make_splits(n: usize, plan: &CvPlan) -> Result<Vec<Split>> {
    plan.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let splits = match plan.scheme {
        FoldScheme::DataSplit => {
            let nv = plan.test_size(n)?;
            (0..plan.npermut).map(|_| from_test(n, index::sample(&mut rng, n, nv).into_vec())).collect()
        }
        FoldScheme::KFold(_) => {
            let k = plan.folds(n)?;
            match plan.split_type {
                SplitType::Consecutive => {
                    let order: Vec<usize> = (0..n).collect();
                    blocks(&order, k).into_iter().map(|t| from_test(n, t)).collect()
                }
                SplitType::Interleaved => (0..k).map(|j| from_test(n, (j..n).step_by(k).collect())).collect(),
                SplitType::Random => {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(&mut rng);
                    blocks(&order, k).into_iter().map(|t| from_test(n, t)).collect()
                }
                SplitType::Timeseries => {
                    let nv = n / k;
                    vec![from_test(n, (n - nv..n).collect())]
                }
            }
        }
    };
    Ok(splits)
}

/// Precomputed out-of-sample predictor for one fold:
/// `pred(k) = P (g_k(lambda) * z)` with `P = W_test D^{1/2} U`.
struct FoldModel {
    projection: DMatrix<f64>,
    z: DVector<f64>,
    lambda: DVector<f64>,
    y_test: DVector<f64>,
    real_k: bool,
}

impl FoldModel {
    fn new(x: &DesignMatrix, y: &DVector<f64>, config: &SmootherConfig, split: &Split) -> Result<Self> {
        let x_train = x.select_rows(&split.train)?;
        let y_train = DVector::from_iterator(split.train.len(), split.train.iter().map(|&i| y[i]));
        let base = config.build(&x_train)?;
        let spec = base.spectral_decompose()?;
        let mut weights = DMatrix::zeros(split.test.len(), split.train.len());
        for (r, &i) in split.test.iter().enumerate() {
            weights.set_row(r, &base.weights_at(&x.rows()[i])?.transpose());
        }
        let mut du = spec.u().clone();
        for (i, mut row) in du.row_iter_mut().enumerate() {
            row *= spec.d_half()[i];
        }
        Ok(Self {
            projection: weights * du,
            z: eigen_coordinates(&spec, &y_train),
            lambda: spec.lambda().clone(),
            y_test: DVector::from_iterator(split.test.len(), split.test.iter().map(|&i| y[i])),
            real_k: spec.supports_real_k(),
        })
    }

    fn loss(&self, loss: Loss, k: f64) -> f64 {
        let c = DVector::from_iterator(
            self.z.len(),
            self.z.iter().zip(self.lambda.iter()).map(|(z, l)| z * geometric(*l, k)),
        );
        let pred = &self.projection * c;
        loss.evaluate(self.y_test.iter().zip(pred.iter()).map(|(y, p)| y - p))
    }

    fn losses(&self, loss: Loss, ks: &[f64]) -> Vec<f64> {
        let g = DMatrix::from_fn(self.z.len(), ks.len(), |i, j| self.z[i] * geometric(self.lambda[i], ks[j]));
        let pred = &self.projection * g;
        (0..ks.len())
            .map(|j| loss.evaluate(self.y_test.iter().zip(pred.column(j).iter()).map(|(y, p)| y - p)))
            .collect()
    }
}

fn cv_eval(k: f64, value: f64) -> Evaluation {
    Evaluation { k, df: f64::NAN, rss: f64::NAN, value }
}

/// Chooses `k` by minimizing the mean out-of-sample loss across folds.
pub fn search_k_cv(
    x: &DesignMatrix,
    y: &DVector<f64>,
    config: &SmootherConfig,
    cv: &CvPlan,
    plan: &SelectionPlan,
) -> Result<SearchOutcome> {
    let splits = make_splits(x.n(), cv)?;
    let folds = splits
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            FoldModel::new(x, y, config, s).map_err(|e| IbrError::Fold { fold: i + 1, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_loss = |k: f64| folds.iter().map(|f| f.loss(cv.loss, k)).sum::<f64>() / folds.len() as f64;

    let kmin = plan.kmin;
    let kmax = plan.kmax.max(kmin);
    let mut trace = Vec::new();
    let numeric = plan.mode == SearchMode::Numeric && folds.iter().all(|f| f.real_k);
    if numeric {
        let points = plan.breakpoints(kmin, kmax);
        for &p in &points {
            trace.push(cv_eval(p, mean_loss(p)));
        }
        for w in points.windows(2) {
            if w[1] - w[0] <= 0.02 {
                continue;
            }
            brent_min(
                |k| {
                    let v = mean_loss(k);
                    trace.push(cv_eval(k, v));
                    v
                },
                w[0],
                w[1],
                0.01,
            );
        }
    } else {
        if plan.mode == SearchMode::Numeric {
            log::warn!("fold spectrum outside [0, 1]; using integer k for cross-validation");
        }
        let first = kmin.ceil() as u64;
        let last = kmax.floor() as u64;
        let mut k = first;
        while k <= last {
            let end = (k + 255).min(last);
            let ks: Vec<f64> = (k..=end).map(|v| v as f64).collect();
            let per_fold: Vec<Vec<f64>> = folds.par_iter().map(|f| f.losses(cv.loss, &ks)).collect();
            for (j, kk) in ks.iter().enumerate() {
                let v = per_fold.iter().map(|l| l[j]).sum::<f64>() / folds.len() as f64;
                trace.push(cv_eval(*kk, v));
            }
            k = end + 1;
        }
    }
    let best = best_of(&trace)
        .filter(|b| b.value.is_finite())
        .ok_or_else(|| IbrError::NoAdmissibleK("cross-validation loss is not finite".into()))?;
    Ok(SearchOutcome { k: best.k, value: best.value, trace, rejected: 0 })
}
