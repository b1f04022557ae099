//! Direct solvers used as ground truth.
//!
//! `lambda > 0` solves the regularized normal equations by dense Cholesky
//! (falling back to an SVD solve if the factorization fails); `lambda = 0`
//! returns the minimum-Euclidean-norm least-squares solution through an SVD
//! with the shared rank cutoff.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{LinalgError, Matrix, RANK_CUTOFF};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    /// Minimum-norm solution through the pseudoinverse (`lambda = 0`).
    Pseudoinverse,
    /// Solution of `(A^T A + lambda I) x = A^T b`.
    RegularizedNormalEquations,
}

#[derive(Debug, Clone)]
pub struct SolutionCertificate {
    pub x_star: DVector<f64>,
    /// Norm of `A^T A x - A^T b + lambda x`.
    pub residual_norm: f64,
    pub method_tag: MethodTag,
    /// True when the Cholesky path failed and the SVD path ran instead.
    pub used_svd_fallback: bool,
}

pub fn direct_oracle(
    a: &Matrix,
    b: &DVector<f64>,
    lambda: f64,
) -> Result<SolutionCertificate, LinalgError> {
    if lambda < 0.0 {
        return Err(LinalgError::NegativeLambda(lambda));
    }
    if b.len() != a.nrows() {
        return Err(LinalgError::DimensionMismatch {
            op: "direct_oracle",
            expected: a.nrows(),
            got: b.len(),
        });
    }
    if a.is_zero() {
        return Err(LinalgError::ZeroMatrix);
    }

    let dense = a.to_dense();
    let atb = dense.transpose() * b;

    let (x_star, method_tag, used_svd_fallback) = if lambda > 0.0 {
        match cholesky_path(&dense, &atb, lambda) {
            Some(x) => (x, MethodTag::RegularizedNormalEquations, false),
            None => (
                svd_path(&dense, b, lambda),
                MethodTag::RegularizedNormalEquations,
                true,
            ),
        }
    } else {
        (svd_path(&dense, b, 0.0), MethodTag::Pseudoinverse, false)
    };

    let grad = dense.transpose() * (&dense * &x_star) - &atb + lambda * &x_star;
    Ok(SolutionCertificate {
        x_star,
        residual_norm: grad.norm(),
        method_tag,
        used_svd_fallback,
    })
}

fn cholesky_path(a: &DMatrix<f64>, atb: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let d = a.ncols();
    let gram = a.transpose() * a + DMatrix::identity(d, d) * lambda;
    Cholesky::new(gram).map(|chol| chol.solve(atb))
}

/// `x = V f(sigma) U^T b` with `f = sigma / (sigma^2 + lambda)`; singular
/// values below the rank cutoff are dropped.
fn svd_path(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u requested");
    let v_t = svd.v_t.as_ref().expect("svd with v_t requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = RANK_CUTOFF * sigma_max;

    let utb = u.transpose() * b;
    let mut scaled = DVector::zeros(svd.singular_values.len());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            scaled[k] = s / (s * s + lambda) * utb[k];
        }
    }
    v_t.transpose() * scaled
}
