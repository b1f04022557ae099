//! Convergence machinery: contraction factors, per-step improvement
//! samples, and a Monte-Carlo check of the expected one-step decrease.
//!
//! The contraction factor is `1 - sigma_min^2(A M^{1/2})` with
//! `M = E[S S^T / ||A S||_2^2]`; `sigma_min` means the smallest singular
//! value above the shared rank cutoff. The improvement factor `gamma`
//! quantifies how much the conjugacy correction tightens the bound over the
//! plain coordinate-gradient step; it is at least 1 by Cauchy-Schwarz, and
//! the expected-decrease bound is always verified at the provable `gamma = 1`
//! relaxation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{ColumnOp, Matrix, RANK_CUTOFF};
use crate::sketch::{SketchDistribution, SketchSample};
use crate::solvers::{rcgls_advance, rcgls_redirect, RcglsState, SolverError};

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error(transparent)]
    Sketch(#[from] crate::sketch::SketchError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("the expected sketch outer product is numerically singular; positive definiteness of E[S S^T] fails")]
    AssumptionViolated,
    #[error("operator has no nonzero singular value")]
    ZeroOperator,
}

/// Rate diagnostics for one (matrix, distribution) pair.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub m_matrix: DMatrix<f64>,
    /// Monte-Carlo samples behind `m_matrix`, `None` when exact.
    pub m_matrix_samples: Option<usize>,
    /// Smallest nonzero singular value squared of `A M^{1/2}`.
    pub sigma_min_sq: f64,
    /// `1 - sigma_min_sq`: the coordinate-gradient contraction factor.
    pub grcd_factor: f64,
    pub gamma_samples: Vec<f64>,
    /// Realized per-step decrease ratios along the sampled trajectory.
    pub empirical_ratios: Vec<f64>,
}

/// `1 - sigma_min^2(A M^{1/2})`, the expected-decrease factor at the
/// `gamma = 1` relaxation.
pub fn contraction_factor(
    a: &Matrix,
    dist: &SketchDistribution,
    rng: &mut ChaCha8Rng,
) -> Result<f64, TheoryError> {
    let est = dist.m_matrix(a, rng)?;
    Ok(1.0 - sigma_min_sq_of_normalized(a, &est.matrix)?)
}

/// Smallest nonzero singular value squared of `A M^{1/2}` from the
/// eigendecomposition of `M^{1/2} A^T A M^{1/2}`.
pub fn sigma_min_sq_of_normalized(a: &Matrix, m: &DMatrix<f64>) -> Result<f64, TheoryError> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lam_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let lam_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lam_max <= 0.0 || lam_min <= RANK_CUTOFF * lam_max {
        return Err(TheoryError::AssumptionViolated);
    }
    let mut half = eig.eigenvectors.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.sqrt();
        for i in 0..half.nrows() {
            half[(i, j)] *= s;
        }
    }
    let m_half = &half * eig.eigenvectors.transpose();

    let dense = a.to_dense();
    let gram = dense.transpose() * &dense;
    let w = &m_half * gram * &m_half;
    let eig_w = SymmetricEigen::new((&w + w.transpose()) * 0.5);
    let max = eig_w.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(TheoryError::ZeroOperator);
    }
    let cutoff = RANK_CUTOFF * RANK_CUTOFF * max;
    let min_nonzero = eig_w
        .eigenvalues
        .iter()
        .cloned()
        .filter(|&v| v > cutoff)
        .fold(f64::INFINITY, f64::min);
    Ok(min_nonzero)
}

/// Coordinate-descent contraction factor `1 - sigma_min^2(A) / ||A||_F^2`
/// with the smallest-nonzero-singular-value convention.
pub fn rcd_factor(a: &Matrix) -> Result<f64, TheoryError> {
    let sv = a.to_dense().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax <= 0.0 {
        return Err(TheoryError::ZeroOperator);
    }
    let cutoff = RANK_CUTOFF * smax;
    let smin = sv
        .iter()
        .cloned()
        .filter(|&s| s > cutoff)
        .fold(f64::INFINITY, f64::min);
    Ok(1.0 - smin * smin / a.frobenius_norm_sq())
}

/// Improvement factor of one realized step: the inverse misalignment between
/// the sketched gradient and the previous direction in the `A^T A` inner
/// product. Returns 1 when there is no previous direction, and infinity when
/// they align perfectly.
pub fn gamma_sample<O: ColumnOp + ?Sized>(
    op: &O,
    s: &SketchSample,
    r: &DVector<f64>,
    p_prev: Option<&DVector<f64>>,
) -> f64 {
    let Some(p_prev) = p_prev else {
        return 1.0;
    };
    let mut scratch = crate::flops::FlopCounter::new();
    let t = crate::solvers::transpose_sketch(op, s, r, &mut scratch);
    let (_, au) = crate::solvers::sketch_image(op, s, &t, &mut scratch);
    let ap = op.apply(p_prev);
    let num = au.dot_dense(&ap);
    let den = au.norm_sq() * ap.norm_squared();
    if den == 0.0 {
        return 1.0;
    }
    let ratio = num * num / den;
    let outer = 1.0 - ratio;
    if outer <= 0.0 {
        return f64::INFINITY;
    }
    1.0 / outer
}

/// Monte-Carlo estimate of one conditional step and its variance.
#[derive(Debug, Clone)]
pub struct DecreaseCheck {
    /// Average of `||x_next - x*||^2` in the `A^T A` norm over the draws.
    pub lhs_estimate: f64,
    /// `(1 - sigma_min^2(A M^{1/2})) * ||x - x*||^2` in the same norm.
    pub rhs_bound: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Freezes the iterate carried by `state` and resamples only the incoming
/// sketch: each draw redirects a copy of the state with a fresh sample and
/// takes one stepsize stage. `state` must hold the direction pair of the
/// previous iteration (the mid-iteration snapshot), or `k = 0` for a fresh
/// start.
pub fn verify_expected_decrease(
    a: &Matrix,
    b: &DVector<f64>,
    x_star: &DVector<f64>,
    state: &RcglsState,
    dist: &SketchDistribution,
    num_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DecreaseCheck, TheoryError> {
    let factor = contraction_factor(a, dist, rng)?;
    let err_nsq = a
        .matvec(&(&state.x - x_star))
        .map_err(SolverError::from)?
        .norm_squared();
    let rhs_bound = factor * err_nsq;

    let mut values = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let s = dist.draw(rng);
        let value = if state.k == 0 {
            let fresh = crate::solvers::rcgls_init(a, b, &state.x, &s)?;
            let mut step = fresh;
            rcgls_advance(&mut step, f64::EPSILON);
            a.matvec(&(&step.x - x_star))
                .map_err(SolverError::from)?
                .norm_squared()
        } else {
            let mut step = state.clone();
            rcgls_redirect(&mut step, a, &s);
            rcgls_advance(&mut step, f64::EPSILON);
            a.matvec(&(&step.x - x_star))
                .map_err(SolverError::from)?
                .norm_squared()
        };
        values.push(value);
    }
    let n = num_samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    // Two-pass variance: identical draws give exactly zero spread.
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std_error = (var / n).sqrt();
    Ok(DecreaseCheck {
        lhs_estimate: mean,
        rhs_bound,
        std_error,
        samples: num_samples,
    })
}

/// Builds a rate report: the contraction machinery plus improvement-factor
/// and realized-ratio samples along one seeded trajectory.
pub fn rate_report(
    a: &Matrix,
    b: &DVector<f64>,
    dist: &SketchDistribution,
    trajectory_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RateReport, TheoryError> {
    let est = dist.m_matrix(a, rng)?;
    let sigma_min_sq = sigma_min_sq_of_normalized(a, &est.matrix)?;
    let grcd_factor = 1.0 - sigma_min_sq;

    let x_star = crate::linalg::direct_oracle(a, b, 0.0)
        .map_err(SolverError::from)?
        .x_star;
    let x0 = DVector::zeros(a.ncols());
    let s0 = dist.draw(rng);
    let mut st = crate::solvers::rcgls_init(a, b, &x0, &s0)?;
    let mut gamma_samples = vec![1.0];
    let mut empirical_ratios = Vec::new();
    let err_nsq = |x: &DVector<f64>| {
        a.matvec(&(x - &x_star))
            .map(|v| v.norm_squared())
            .unwrap_or(f64::NAN)
    };
    let mut prev = err_nsq(&st.x);
    for _ in 0..trajectory_steps {
        rcgls_advance(&mut st, f64::EPSILON);
        let cur = err_nsq(&st.x);
        if prev > 0.0 {
            empirical_ratios.push(cur / prev);
        }
        let s = dist.draw(rng);
        gamma_samples.push(gamma_sample(a, &s, &st.r, Some(&st.p)));
        rcgls_redirect(&mut st, a, &s);
        prev = cur;
    }
    Ok(RateReport {
        m_matrix: est.matrix,
        m_matrix_samples: est.mc_samples,
        sigma_min_sq,
        grcd_factor,
        gamma_samples,
        empirical_ratios,
    })
}

/// Runs the plain engine to the mid-iteration snapshot used by
/// [`verify_expected_decrease`]: the iterate after `k` stepsize stages with
/// the direction pair of iteration `k - 1` still in place (`k = 0` gives the
/// fresh start).
pub fn rcgls_presketch_state(
    a: &Matrix,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    dist: &SketchDistribution,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RcglsState, TheoryError> {
    if k == 0 {
        // No sketch drawn yet: an empty direction pair marks the fresh start.
        let r = a.matvec(x0).map(|ax| b - ax).map_err(SolverError::from)?;
        let grad_scale = a.rmatvec(b).map_err(SolverError::from)?.norm();
        return Ok(RcglsState {
            x: x0.clone(),
            r,
            p: DVector::zeros(a.ncols()),
            v: DVector::zeros(a.nrows()),
            mu: 0.0,
            tau: 0.0,
            k: 0,
            flops: crate::flops::FlopCounter::new(),
            sketched_grad_nsq: 0.0,
            v_nsq: 0.0,
            grad_scale,
        });
    }
    let s0 = dist.draw(rng);
    let mut st = crate::solvers::rcgls_init(a, b, x0, &s0)?;
    for step in 1..=k {
        rcgls_advance(&mut st, f64::EPSILON);
        if step == k {
            break;
        }
        let s = dist.draw(rng);
        rcgls_redirect(&mut st, a, &s);
    }
    st.k = k;
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::direct_oracle;
    use crate::testing;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn weighted_coordinate_factor_matches_rcd_factor() {
        for seed in 0..10u64 {
            let a = testing::random_dense(9, 5, 900 + seed);
            let dist = SketchDistribution::coordinate_weighted(&a).unwrap();
            let mut rng = testing::rng(seed);
            let cf = contraction_factor(&a, &dist, &mut rng).unwrap();
            let rcd = rcd_factor(&a).unwrap();
            assert!((cf - rcd).abs() <= 1e-10, "seed {seed}: {cf} vs {rcd}");
        }
    }

    #[test]
    fn identity_factor_uses_spectral_norm() {
        let a = testing::random_dense(8, 4, 910);
        let dist = SketchDistribution::identity(4);
        let mut rng = testing::rng(1);
        let cf = contraction_factor(&a, &dist, &mut rng).unwrap();
        let sv = a.to_dense().singular_values();
        let smax_sq = sv.iter().map(|s| s * s).fold(0.0, f64::max);
        let smin_sq = sv.iter().map(|s| s * s).fold(f64::INFINITY, f64::min);
        assert_relative_eq!(cf, 1.0 - smin_sq / smax_sq, max_relative = 1e-9);
    }

    #[test]
    fn identity_matrix_coordinate_factor() {
        let a = Matrix::from_dense(DMatrix::identity(5, 5));
        let dist = SketchDistribution::coordinate_weighted(&a).unwrap();
        let mut rng = testing::rng(2);
        let cf = contraction_factor(&a, &dist, &mut rng).unwrap();
        assert_relative_eq!(cf, 1.0 - 1.0 / 5.0, max_relative = 1e-12);
    }

    #[test]
    fn rcd_factor_examples() {
        let a = Matrix::from_dense(DMatrix::identity(4, 4));
        assert_relative_eq!(rcd_factor(&a).unwrap(), 0.75, max_relative = 1e-14);

        let diag = Matrix::from_dense(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        assert_relative_eq!(rcd_factor(&diag).unwrap(), 1.0 - 1.0 / 5.0, max_relative = 1e-14);

        let rank1 = Matrix::from_dense(DMatrix::from_row_slice(2, 1, &[1.0, 1.0]));
        assert_relative_eq!(rcd_factor(&rank1).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn factor_lies_in_unit_interval_for_full_rank() {
        for seed in 0..5u64 {
            let a = testing::random_dense(10, 6, 920 + seed);
            let mut rng = testing::rng(seed);
            for dist in [
                SketchDistribution::coordinate_weighted(&a).unwrap(),
                SketchDistribution::uniform_block(6, 2).unwrap(),
                SketchDistribution::identity(6),
            ] {
                let cf = contraction_factor(&a, &dist, &mut rng).unwrap();
                assert!((0.0..1.0).contains(&cf), "factor {cf}");
            }
        }
    }

    #[test]
    fn gamma_conventions() {
        let a = testing::random_dense(6, 3, 930);
        let r = testing::random_vector(6, 931);
        let s = SketchSample::Identity { ambient: 3 };
        assert_eq!(gamma_sample(&a, &s, &r, None), 1.0);
        let zero_dir = DVector::zeros(3);
        assert_eq!(gamma_sample(&a, &s, &r, Some(&zero_dir)), 1.0);
    }

    #[test]
    fn gamma_exceeds_one_along_deterministic_cgls() {
        let a = testing::conditioned_dense(12, 6, 1.0, 8.0, 940);
        let b = testing::random_vector(12, 941);
        let mut st = crate::solvers::cgls_init(&a, &b, &DVector::zeros(6)).unwrap();
        let s = SketchSample::Identity { ambient: 6 };
        let atb_norm = a.rmatvec(&b).unwrap().norm();
        for _ in 0..5 {
            let p_prev = st.p.clone();
            crate::solvers::cgls_step(&mut st, &a);
            let grad_norm = a.rmatvec(&st.r).unwrap().norm();
            if grad_norm > 1e-8 * atb_norm {
                let g = gamma_sample(&a, &s, &st.r, Some(&p_prev));
                assert!(g > 1.0 + 1e-8, "gamma {g} not strictly above one");
            }
        }
    }

    #[test]
    fn expected_decrease_at_fixed_point_is_zero() {
        let a = testing::random_dense(8, 4, 950);
        let b = testing::random_vector(8, 951);
        let x_star = direct_oracle(&a, &b, 0.0).unwrap().x_star;
        let dist = SketchDistribution::coordinate_weighted(&a).unwrap();
        let mut rng = testing::rng(3);
        let st = rcgls_presketch_state(&a, &b, &x_star, &dist, 0, &mut rng).unwrap();
        let check = verify_expected_decrease(&a, &b, &x_star, &st, &dist, 200, &mut rng).unwrap();
        assert!(check.lhs_estimate <= 1e-20);
        assert!(check.rhs_bound <= 1e-20);
    }

    #[test]
    fn expected_decrease_bound_holds_at_start() {
        let a = testing::random_dense(12, 6, 960);
        let b = testing::random_vector(12, 961);
        let x_star = direct_oracle(&a, &b, 0.0).unwrap().x_star;
        let dist = SketchDistribution::coordinate_weighted(&a).unwrap();
        let mut rng = testing::rng(4);
        let st =
            rcgls_presketch_state(&a, &b, &DVector::zeros(6), &dist, 0, &mut rng).unwrap();
        let check =
            verify_expected_decrease(&a, &b, &x_star, &st, &dist, 10_000, &mut rng).unwrap();
        assert!(
            check.lhs_estimate <= check.rhs_bound + 3.0 * check.std_error,
            "lhs {} rhs {} se {}",
            check.lhs_estimate,
            check.rhs_bound,
            check.std_error
        );
    }

    #[test]
    fn deterministic_distribution_has_no_monte_carlo_spread() {
        let a = testing::random_dense(12, 6, 970);
        let b = testing::random_vector(12, 971);
        let x_star = direct_oracle(&a, &b, 0.0).unwrap().x_star;
        let dist = SketchDistribution::identity(6);
        let mut rng = testing::rng(5);
        let st =
            rcgls_presketch_state(&a, &b, &DVector::zeros(6), &dist, 3, &mut rng).unwrap();
        let check = verify_expected_decrease(&a, &b, &x_star, &st, &dist, 64, &mut rng).unwrap();
        assert!(check.std_error <= 1e-12 * (1.0 + check.lhs_estimate));
        assert!(check.lhs_estimate <= check.rhs_bound * (1.0 + 1e-9));
    }
}
