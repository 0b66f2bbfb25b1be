//! Greedy forward variable selection around full iterative bias reduction
//! fits.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::engine::fit;
use crate::error::{IbrError, Result};
use crate::selection::{CriterionKind, SelectionPlan};
use crate::smoother::{DesignMatrix, SmootherConfig};

/// Matrix of stage-by-variable criterion values.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    /// One row per retained stage; infinity marks variables already in the
    /// model or whose fit failed.
    pub r: Vec<Vec<f64>>,
    /// 0-based column indices in order of inclusion.
    pub selected_order: Vec<usize>,
    /// Minimum of each retained row.
    pub best_values: Vec<f64>,
    /// Values of the stage that failed to improve, when the search stopped
    /// early.
    pub rejected_stage: Option<Vec<f64>>,
}

impl ForwardResult {
    pub fn stages(&self) -> usize {
        self.r.len()
    }
}

/// Runs forward selection. Every candidate subset is fitted with `plan`
/// and scored with `varcrit` at its selected iteration count.
pub fn forward_select(
    x: &DesignMatrix,
    y: &DVector<f64>,
    config: &SmootherConfig,
    plan: &SelectionPlan,
    varcrit: CriterionKind,
) -> Result<ForwardResult> {
    if varcrit.is_cross_validation() {
        return Err(IbrError::InvalidInput(format!(
            "varcrit must be one of gcv, aic, aicc, bic, gmdl; got '{varcrit}'"
        )));
    }
    let d = x.d();
    let mut selected: Vec<usize> = Vec::new();
    let mut r = Vec::new();
    let mut best_values = Vec::new();
    let mut s_min = f64::INFINITY;
    let mut rejected_stage = None;

    for stage in 0..d {
        let candidates: Vec<usize> = (0..d).filter(|j| !selected.contains(j)).collect();
        let scores: Vec<(usize, f64)> = candidates
            .par_iter()
            .map(|&j| {
                let mut cols = selected.clone();
                cols.push(j);
                let value = x
                    .select_columns(&cols)
                    .and_then(|xs| fit(&xs, y, config, plan))
                    .and_then(|f| f.evaluate(varcrit));
                match value {
                    Ok(v) => (j, v),
                    Err(e) => {
                        log::warn!("stage {}: fit with variable {} failed: {e}", stage + 1, j + 1);
                        (j, f64::INFINITY)
                    }
                }
            })
            .collect();
        let mut row = vec![f64::INFINITY; d];
        for &(j, v) in &scores {
            row[j] = v;
        }
        let Some(&(best_j, best_v)) = scores
            .iter()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        else {
            if stage == 0 {
                return Err(IbrError::InvalidInput("every single-variable fit failed".into()));
            }
            rejected_stage = Some(row);
            break;
        };
        if best_v >= s_min {
            rejected_stage = Some(row);
            break;
        }
        selected.push(best_j);
        s_min = best_v;
        best_values.push(best_v);
        r.push(row);
    }
    Ok(ForwardResult { r, selected_order: selected, best_values, rejected_stage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_variable() {
        let x = DesignMatrix::from_rows(&(0..20).map(|i| vec![i as f64 / 19.0]).collect::<Vec<_>>()).unwrap();
        let y = DVector::from_iterator(20, (0..20).map(|i| ((i as f64) / 3.0).sin() + 0.1 * (i % 3) as f64));
        let res =
            forward_select(&x, &y, &SmootherConfig::default(), &SelectionPlan::default(), CriterionKind::Gcv)
                .unwrap();
        assert_eq!(res.selected_order, vec![0]);
        assert_eq!(res.stages(), 1);
        assert!(res.rejected_stage.is_none());
    }

    #[test]
    fn rejects_cv_varcrit() {
        let x = DesignMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let y = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        assert!(forward_select(
            &x,
            &y,
            &SmootherConfig::default(),
            &SelectionPlan::default(),
            CriterionKind::Rmse
        )
        .is_err());
    }

    #[test]
    fn relevant_variable_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let y = DVector::from_iterator(
            60,
            rows.iter().map(|r| (6.0 * r[1]).sin() + 0.1 * (rng.random::<f64>() - 0.5)),
        );
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let res =
            forward_select(&x, &y, &SmootherConfig::default(), &SelectionPlan::default(), CriterionKind::Gcv)
                .unwrap();
        assert_eq!(res.selected_order[0], 1);
        for w in res.best_values.windows(2) {
            assert!(w[1] < w[0]);
        }
        for (s, row) in res.r.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(v.is_finite(), !res.selected_order[..s].contains(&j));
            }
        }
    }
}
