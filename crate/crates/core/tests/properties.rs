//! Randomized invariants of smoothers, iteration, criteria and splitting.

mod common;

use common::{gaussian, problem, tps};
use ibr::nalgebra::DVector;
use ibr::selection::{search_k_exhaustive, search_k_numeric};
use ibr::smoother::{build_kernel_smoother, build_tps_smoother, KernelSmootherSpec};
use ibr::{
    criterion_value, df_of_k, fit, iterate_fitted, iterate_fitted_recursive, make_splits, rss_of_k,
    BaseSmoother, CriterionKind, CvPlan, DesignMatrix, FoldScheme, KernelKind, Loss, SearchMode,
    SelectionPlan, SplitType,
};
use proptest::prelude::*;

const KINDS: [KernelKind; 5] = [
    KernelKind::Gaussian,
    KernelKind::Triangle,
    KernelKind::Quartic,
    KernelKind::Epanechnikov,
    KernelKind::Uniform,
];

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn kernel_rows_are_stochastic(seed in 0u64..10_000, n in 5usize..30, d in 1usize..4, kind in 0usize..5) {
        let p = problem(seed, n, d);
        let s = ibr::SmootherConfig::Kernel { kind: KINDS[kind], df: 1.2, total: false }.build(&p.x);
        // compact kernels may fail to calibrate on unlucky designs; that is an error, not a bad matrix
        if let Ok(s) = s {
            let m = s.matrix();
            for i in 0..n {
                let row_sum: f64 = m.row(i).iter().sum();
                prop_assert!((row_sum - 1.0).abs() < 1e-12);
                prop_assert!(m.row(i).iter().all(|v| *v >= 0.0));
            }
        }
    }

    #[test]
    fn spectral_form_reconstructs(seed in 0u64..10_000, n in 6usize..35, d in 1usize..4, use_tps in any::<bool>()) {
        let p = problem(seed, n, d);
        let base = if use_tps { tps(1.1) } else { gaussian(1.1) }.build(&p.x).unwrap();
        let spec = base.spectral_decompose().unwrap();
        let err = (spec.reconstruct() - base.matrix()).abs().max();
        prop_assert!(err < 1e-8, "reconstruction error {err}");
    }

    #[test]
    fn pd_kernels_have_unit_interval_spectrum(seed in 0u64..10_000, n in 5usize..30, d in 1usize..3, tri in any::<bool>()) {
        let p = problem(seed, n, d);
        let kind = if tri { KernelKind::Triangle } else { KernelKind::Gaussian };
        if let Ok(base) = (ibr::SmootherConfig::Kernel { kind, df: 1.3, total: false }).build(&p.x) {
            let spec = base.spectral_decompose().unwrap();
            prop_assert!(spec.min_eigenvalue() > -1e-10, "min eigenvalue {}", spec.min_eigenvalue());
            prop_assert!(spec.max_eigenvalue() < 1.0 + 1e-10);
            prop_assert!((spec.max_eigenvalue() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tps_reproduces_low_degree_polynomials(seed in 0u64..10_000, d in 1usize..3, order in 2usize..4, lambda_exp in -6f64..2.0) {
        let n = if d == 1 { 15 } else { 25 };
        let p = problem(seed, n, d);
        let tps = build_tps_smoother(&p.x, order, 10f64.powf(lambda_exp)).unwrap();
        let base = BaseSmoother::Tps(tps);
        // all monomials of total degree < order
        let exps: Vec<Vec<usize>> = match d {
            1 => (0..order).map(|a| vec![a]).collect(),
            _ => (0..order).flat_map(|a| (0..order - a).map(move |b| vec![a, b])).collect(),
        };
        let eval = |pt: &[f64], e: &[usize]| pt.iter().zip(e).map(|(v, k)| v.powi(*k as i32)).product::<f64>();
        for e in &exps {
            let v = DVector::from_fn(n, |i, _| eval(&p.x.rows()[i], e));
            let sv = base.matrix() * &v;
            prop_assert!((&sv - &v).amax() < 1e-8, "exponents {e:?}: {}", (&sv - &v).amax());
            let probe: Vec<f64> = (0..d).map(|j| 0.3 + 0.17 * j as f64).collect();
            let w = base.weights_at(&probe).unwrap();
            prop_assert!((w.dot(&v) - eval(&probe, e)).abs() < 1e-8);
        }
    }

    #[test]
    fn spectral_and_recursive_paths_agree(seed in 0u64..10_000, n in 6usize..30, d in 1usize..4, use_tps in any::<bool>(), k in 1u64..120) {
        let p = problem(seed, n, d);
        let base = if use_tps { tps(1.1) } else { gaussian(1.1) }.build(&p.x).unwrap();
        let spec = base.spectral_decompose().unwrap();
        let a = iterate_fitted(&spec, &p.y, k as f64).unwrap();
        let b = iterate_fitted_recursive(&base, &p.y, k).unwrap();
        prop_assert!((a - b).amax() < 1e-8);
    }

    #[test]
    fn df_and_rss_are_monotone(seed in 0u64..10_000, n in 6usize..30, d in 1usize..3, lo in 1f64..50.0, step in 0.5f64..500.0) {
        let p = problem(seed, n, d);
        let spec = gaussian(1.1).build(&p.x).unwrap().spectral_decompose().unwrap();
        let hi = lo + step;
        prop_assert!(df_of_k(&spec, hi).unwrap() >= df_of_k(&spec, lo).unwrap() - 1e-12);
        prop_assert!(rss_of_k(&spec, &p.y, hi).unwrap() <= rss_of_k(&spec, &p.y, lo).unwrap() * (1.0 + 1e-10) + 1e-14);
        prop_assert!(df_of_k(&spec, hi).unwrap() <= n as f64 + 1e-9);
    }

    #[test]
    fn many_iterations_interpolate(seed in 0u64..10_000, n in 4usize..15) {
        // a narrow kernel on distinct points keeps every eigenvalue away from zero
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 + 0.3 * ((seed + i as u64) % 3) as f64]).collect();
        let design = DesignMatrix::from_rows(&x).unwrap();
        let y = DVector::from_fn(n, |i, _| ((i as u64 * 31 + seed) % 17) as f64 / 17.0);
        let s = build_kernel_smoother(&design, KernelSmootherSpec::manual(KernelKind::Gaussian, vec![0.6])).unwrap();
        let spec = BaseSmoother::Kernel(s).spectral_decompose().unwrap();
        prop_assume!(spec.min_eigenvalue() > 1e-3);
        let m = iterate_fitted(&spec, &y, 1e5).unwrap();
        prop_assert!((m - &y).amax() < 1e-8);
        prop_assert!((df_of_k(&spec, 1e5).unwrap() - n as f64).abs() < 1e-8);
    }

    #[test]
    fn criteria_increase_with_rss_and_df(n in 20usize..500, rss in 1e-3f64..1e3, df_frac in 0.01f64..0.6, bump in 1.001f64..3.0) {
        let df = df_frac * n as f64;
        for kind in [CriterionKind::Gcv, CriterionKind::Aic, CriterionKind::Bic, CriterionKind::Aicc, CriterionKind::Gmdl] {
            let base = criterion_value(kind, n, rss, df, 10.0 * rss).unwrap();
            let worse = criterion_value(kind, n, rss * bump, df, 10.0 * rss).unwrap();
            prop_assert!(worse > base, "{kind} not increasing in rss");
        }
        for kind in [CriterionKind::Gcv, CriterionKind::Aic, CriterionKind::Bic, CriterionKind::Aicc] {
            let df2 = (df * bump).min(0.65 * n as f64);
            prop_assume!(df2 > df);
            let base = criterion_value(kind, n, rss, df, 0.0).unwrap();
            let more = criterion_value(kind, n, rss, df2, 0.0).unwrap();
            prop_assert!(more > base, "{kind} not increasing in df");
        }
    }

    #[test]
    fn kfold_plans_partition(n in 4usize..200, k in 2usize..12, ty in 0usize..4, seed in 0u64..1000) {
        prop_assume!(k <= n);
        let split_type = [SplitType::Random, SplitType::Consecutive, SplitType::Interleaved, SplitType::Timeseries][ty];
        let mut plan = CvPlan::kfold(k, split_type, Loss::Rmse);
        plan.seed = seed;
        let splits = make_splits(n, &plan).unwrap();
        for s in &splits {
            prop_assert!(!s.test.is_empty() && !s.train.is_empty());
            prop_assert!(s.test.iter().all(|i| !s.train.contains(i)));
            prop_assert_eq!(s.test.len() + s.train.len(), n);
        }
        if split_type != SplitType::Timeseries {
            let mut all: Vec<usize> = splits.iter().flat_map(|s| s.test.iter().copied()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
        prop_assert_eq!(make_splits(n, &plan).unwrap(), splits);
    }

    #[test]
    fn data_splits_are_disjoint(n in 10usize..200, ntest in 1usize..9, npermut in 1usize..6, seed in 0u64..1000) {
        let mut plan = CvPlan::for_loss(Loss::Map);
        plan.ntest = Some(ntest);
        plan.npermut = npermut;
        plan.seed = seed;
        let splits = make_splits(n, &plan).unwrap();
        prop_assert_eq!(splits.len(), npermut);
        for s in &splits {
            prop_assert_eq!(s.test.len(), ntest);
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
        prop_assert_eq!(make_splits(n, &plan).unwrap(), splits);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn traces_respect_guards(seed in 0u64..10_000, n in 8usize..35, d in 1usize..3, dfmaxi_frac in 0.2f64..0.9, exhaustive in any::<bool>()) {
        let p = problem(seed, n, d);
        let spec = gaussian(1.1).build(&p.x).unwrap().spectral_decompose().unwrap();
        let plan = SelectionPlan {
            dfmaxi: Some(dfmaxi_frac * n as f64),
            kmax: 5e3,
            mode: if exhaustive { SearchMode::Exhaustive } else { SearchMode::Numeric },
            ..SelectionPlan::default()
        };
        let out = if exhaustive { search_k_exhaustive(&spec, &p.y, &plan) } else { search_k_numeric(&spec, &p.y, &plan) };
        if let Ok(out) = out {
            for e in &out.trace {
                prop_assert!(e.df <= dfmaxi_frac * n as f64);
                prop_assert!(e.df <= n as f64 * (1.0 - 1e-10));
                prop_assert!(e.rss > 1e-10);
            }
        }
    }

    #[test]
    fn numeric_search_is_at_least_as_good(seed in 0u64..10_000, n in 8usize..30, crit in 0usize..5) {
        let p = problem(seed, n, 1);
        let spec = gaussian(1.1).build(&p.x).unwrap().spectral_decompose().unwrap();
        let criterion = [CriterionKind::Gcv, CriterionKind::Aic, CriterionKind::Aicc, CriterionKind::Bic, CriterionKind::Gmdl][crit];
        let plan = SelectionPlan { criterion, kmax: 2e3, ..SelectionPlan::default() };
        let num = search_k_numeric(&spec, &p.y, &plan).unwrap();
        let exh = search_k_exhaustive(&spec, &p.y, &plan).unwrap();
        prop_assert!(num.value <= exh.value + 1e-6, "numeric {} vs exhaustive {}", num.value, exh.value);
    }

    #[test]
    fn cv_selection_is_seeded(seed in 0u64..10_000) {
        let p = problem(seed, 30, 1);
        let mut plan = SelectionPlan::with_criterion(CriterionKind::Rmse);
        plan.kmax = 2e3;
        if let Some(cv) = plan.cv.as_mut() {
            cv.scheme = FoldScheme::KFold(Some(5));
            cv.seed = seed;
        }
        let a = fit(&p.x, &p.y, &gaussian(1.1), &plan).unwrap();
        let b = fit(&p.x, &p.y, &gaussian(1.1), &plan).unwrap();
        prop_assert_eq!(a.k, b.k);
        prop_assert_eq!(a.fitted, b.fitted);
    }
}

#[test]
fn power_oracle_matches_spectral_form() {
    let p = problem(3, 12, 2);
    let base = gaussian(1.1).build(&p.x).unwrap();
    let spec = base.spectral_decompose().unwrap();
    for k in [1, 2, 7, 30] {
        let want = common::power_oracle(base.matrix(), &p.y, k);
        assert!((iterate_fitted(&spec, &p.y, k as f64).unwrap() - want).amax() < 1e-10);
    }
}
