#![allow(dead_code)]

pub mod r_rng;

use std::path::PathBuf;

use ibr::nalgebra::{DMatrix, DVector};
use ibr::{DesignMatrix, KernelKind, SmootherConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random regression problem with a smooth signal plus noise.
pub struct Problem {
    pub x: DesignMatrix,
    pub y: DVector<f64>,
}

pub fn problem(seed: u64, n: usize, d: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
    let y = DVector::from_fn(n, |i, _| {
        let s: f64 = (0..d).map(|j| (3.0 * data[(i, j)] + j as f64).sin()).sum();
        s + 0.3 * (rng.random::<f64>() - 0.5)
    });
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    Problem { x: DesignMatrix::new(data, names).unwrap(), y }
}

pub fn gaussian(df: f64) -> SmootherConfig {
    SmootherConfig::Kernel { kind: KernelKind::Gaussian, df, total: false }
}

pub fn tps(df: f64) -> SmootherConfig {
    SmootherConfig::Tps { order: None, df }
}

/// Dense matrix power oracle: (I - (I - S)^k) y.
pub fn power_oracle(s: &DMatrix<f64>, y: &DVector<f64>, k: u32) -> DVector<f64> {
    let n = s.nrows();
    let b = DMatrix::identity(n, n) - s;
    let mut p = DMatrix::identity(n, n);
    for _ in 0..k {
        p = &p * &b;
    }
    y - p * y
}

pub fn ozone_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ozone.csv")
}
