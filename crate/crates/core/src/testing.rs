//! Seeded problem generators shared by tests and benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dense(nrows: usize, ncols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    Matrix::from_dense(DMatrix::from_fn(nrows, ncols, |_, _| {
        r.sample::<f64, _>(StandardNormal)
    }))
}

pub fn random_vector(len: usize, seed: u64) -> DVector<f64> {
    let mut r = rng(seed);
    DVector::from_fn(len, |_, _| r.sample::<f64, _>(StandardNormal))
}

/// Random sparse matrix with roughly `density * nrows` nonzeros per column;
/// every column keeps at least one nonzero so weighted coordinate sampling
/// stays well defined.
pub fn random_sparse(nrows: usize, ncols: usize, density: f64, seed: u64) -> Matrix {
    let mut r = rng(seed);
    let per_col = ((nrows as f64 * density).round() as usize).max(1);
    let mut triplets = Vec::new();
    for j in 0..ncols {
        let mut rows: Vec<usize> = (0..nrows).collect();
        for k in 0..per_col {
            let pick = r.gen_range(k..nrows);
            rows.swap(k, pick);
        }
        for &i in &rows[..per_col] {
            triplets.push((i, j, r.sample::<f64, _>(StandardNormal)));
        }
    }
    Matrix::from_triplets(nrows, ncols, &triplets).expect("valid triplets")
}

/// Matrix with prescribed singular values spaced log-uniformly in
/// `[sigma_min, sigma_max]`, built from random orthonormal factors.
pub fn conditioned_dense(
    nrows: usize,
    ncols: usize,
    sigma_min: f64,
    sigma_max: f64,
    seed: u64,
) -> Matrix {
    let mut r = rng(seed);
    let m = nrows.min(ncols);
    let gu = DMatrix::from_fn(nrows, m, |_, _| r.sample::<f64, _>(StandardNormal));
    let gv = DMatrix::from_fn(ncols, m, |_, _| r.sample::<f64, _>(StandardNormal));
    let qu = gu.qr().q();
    let qv = gv.qr().q();
    let mut sig = DMatrix::zeros(m, m);
    for k in 0..m {
        let t = if m == 1 { 0.0 } else { k as f64 / (m - 1) as f64 };
        sig[(k, k)] = sigma_max * (sigma_min / sigma_max).powf(t);
    }
    Matrix::from_dense(&qu * sig * qv.transpose())
}
