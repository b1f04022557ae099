//! Synthetic problem generator: correlated Gaussian rows, a prescribed
//! decaying singular spectrum hitting a target condition number, and
//! additive noise at a controlled relative level.

use anyhow::{bail, Result};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rcgls::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// `sigma_i = sigma_1 * rho^(i-1)` with `rho` chosen so
    /// `sigma_1 / sigma_m` equals the target condition number.
    GeometricDecay,
}

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// Target condition number of the generated matrix.
    pub cond: f64,
    pub corr_base: f64,
    pub corr_scale: f64,
    /// Relative noise level `||e|| / ||A x_ref||`.
    pub noise_level: f64,
    pub spectrum: SpectrumKind,
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            cond: 1e4,
            corr_base: 0.7,
            corr_scale: 5.0,
            noise_level: 0.1,
            spectrum: SpectrumKind::GeometricDecay,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub a: Matrix,
    pub b: DVector<f64>,
    /// Smooth reference signal behind the right-hand side.
    pub x_ref: DVector<f64>,
}

/// Builds the Toeplitz row covariance `corr_scale * corr_base^|i-j|`.
pub fn covariance(spec: &SyntheticSpec) -> DMatrix<f64> {
    DMatrix::from_fn(spec.d, spec.d, |i, j| {
        spec.corr_scale * spec.corr_base.powi((i as i32 - j as i32).abs())
    })
}

pub fn generate_synthetic(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<SyntheticDataset> {
    if spec.n == 0 || spec.d == 0 {
        bail!("empty problem shape {}x{}", spec.n, spec.d);
    }
    if spec.cond <= 1.0 || spec.cond.is_nan() {
        bail!("condition number must exceed 1, got {}", spec.cond);
    }
    if spec.noise_level < 0.0 {
        bail!("noise level must be nonnegative");
    }
    let m = spec.n.min(spec.d);
    if m == 1 {
        bail!("a decaying spectrum needs min(n, d) >= 2");
    }

    // Rows i.i.d. from a unit-mean Gaussian with Toeplitz covariance.
    let gamma = covariance(spec);
    let chol = Cholesky::new(gamma)
        .ok_or_else(|| anyhow::anyhow!("row covariance is not positive definite"))?;
    let z = DMatrix::from_fn(spec.n, spec.d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let base = DMatrix::from_element(spec.n, spec.d, 1.0) + z * chol.l().transpose();

    // Replace the singular values with a geometric decay hitting the target
    // condition number exactly; the leading value is normalized to one.
    let svd = base.svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap()
    });
    let rho = spec.cond.powf(-1.0 / (m as f64 - 1.0));
    let mut scaled_u = u.select_columns(order.iter());
    for (rank, mut col) in scaled_u.column_iter_mut().enumerate() {
        col *= rho.powi(rank as i32);
    }
    let a = scaled_u * v_t.select_rows(order.iter());

    let x_ref = DVector::from_fn(spec.d, |i, _| {
        (std::f64::consts::PI * (i + 1) as f64 / (spec.d + 1) as f64).sin()
    });
    let ax = &a * &x_ref;
    let mut noise = DVector::from_fn(spec.n, |_, _| rng.sample::<f64, _>(StandardNormal));
    if spec.noise_level > 0.0 {
        let target = spec.noise_level * ax.norm();
        noise *= target / noise.norm();
    } else {
        noise.fill(0.0);
    }
    let b = &ax + noise;

    Ok(SyntheticDataset {
        a: Matrix::from_dense(a),
        b,
        x_ref,
    })
}
