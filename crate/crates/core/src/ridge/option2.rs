//! Ridge iteration in the row space (sketches live in dimension `n`).
//!
//! Solves for the auxiliary variable `y` of the block `[sqrt(l) I; A^T]`
//! and maintains `x = A^T y / sqrt(l)` incrementally through the direction
//! image, so no transposed product with `y` is ever recomputed. Row access
//! goes through the stored transpose of the coefficient matrix.

use nalgebra::DVector;

use crate::flops::FlopCounter;
use crate::linalg::{ColumnOp, Matrix, RidgeProblem};
use crate::sketch::SketchSample;
use crate::solvers::SolverError;
use crate::solvers::{restrict, sketch_image, transpose_sketch};

#[derive(Debug, Clone)]
pub struct RidgeStateII {
    pub y: DVector<f64>,
    /// Recovered primal iterate `A^T y / sqrt(l)`, updated incrementally.
    pub x: DVector<f64>,
    pub w: DVector<f64>,
    pub p: DVector<f64>,
    /// `A^T p`.
    pub u: DVector<f64>,
    pub sigma: f64,
    pub tau: f64,
    pub mu: f64,
    pub k: usize,
    pub flops: FlopCounter,
    pub rescue_events: u64,
    pub(crate) w_nsq: f64,
    pub(crate) grad_scale: f64,
}

/// `w = sqrt(l) S^T b - sqrt(l) S^T A x - l S^T y`, row products through the
/// transpose view.
fn sketched_gradient(
    a_transpose: &Matrix,
    lambda: f64,
    s: &SketchSample,
    b: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    flops: &mut FlopCounter,
) -> DVector<f64> {
    let sqrt_l = lambda.sqrt();
    let mut w = restrict(s, b, flops) * sqrt_l;
    let sax = transpose_sketch(a_transpose, s, x, flops);
    w.axpy(-sqrt_l, &sax, 1.0);
    let sy = restrict(s, y, flops);
    w.axpy(-lambda, &sy, 1.0);
    flops.sketched(2 * w.len());
    w
}

pub fn ridge_option2_init(
    problem: &RidgeProblem,
    a_transpose: &Matrix,
    y0: &DVector<f64>,
    s0: &SketchSample,
) -> Result<RidgeStateII, SolverError> {
    let (n, d) = (problem.nrows(), problem.ncols());
    if y0.len() != n {
        return Err(SolverError::DimensionMismatch {
            what: "initial auxiliary iterate",
            expected: n,
            got: y0.len(),
        });
    }
    if problem.a_bar.is_zero() {
        return Err(SolverError::ZeroOperator);
    }
    let lambda = problem.lambda;
    let sqrt_l = lambda.sqrt();
    let mut flops = FlopCounter::new();

    let x0 = if y0.iter().all(|&z| z == 0.0) {
        DVector::zeros(d)
    } else {
        flops.full_dim(a_transpose.full_product_cost());
        ColumnOp::apply(a_transpose, y0) / sqrt_l
    };
    // Scale of the subproblem gradient at zero: sqrt(l) ||b||.
    let grad_scale = sqrt_l * problem.b_bar.norm();
    flops.scalars(1);

    let w = sketched_gradient(
        a_transpose,
        lambda,
        s0,
        &problem.b_bar,
        &x0,
        y0,
        &mut flops,
    );
    let w_nsq = w.norm_squared();
    flops.scalars(1);
    let (sw, asw) = sketch_image(a_transpose, s0, &w, &mut flops);
    let sigma = asw.norm_sq() + lambda * sw.norm_sq();
    flops.scalars(3);

    Ok(RidgeStateII {
        y: y0.clone(),
        x: x0,
        w,
        p: sw.to_dense(),
        u: asw.to_dense(),
        sigma,
        tau: 0.0,
        mu: 0.0,
        k: 0,
        flops,
        rescue_events: 0,
        w_nsq,
        grad_scale,
    })
}

pub fn ridge_option2_step(
    state: &mut RidgeStateII,
    problem: &RidgeProblem,
    a_transpose: &Matrix,
    s_next: &SketchSample,
    zero_threshold: f64,
) {
    let lambda = problem.lambda;
    let sqrt_l = lambda.sqrt();

    let floor = zero_threshold * state.grad_scale;
    if state.w_nsq > floor * floor && state.sigma > 0.0 {
        state.mu = state.w_nsq / state.sigma;
        state.flops.scalars(1);
        let mu = state.mu;
        state.y.axpy(mu, &state.p.clone(), 1.0);
        state.x.axpy(mu / sqrt_l, &state.u.clone(), 1.0);
        state.flops.full_dim(state.y.len());
        state.flops.full_dim(state.x.len());
        state.flops.scalars(1);
    } else {
        state.mu = 0.0;
    }

    let w_next = sketched_gradient(
        a_transpose,
        lambda,
        s_next,
        &problem.b_bar,
        &state.x,
        &state.y,
        &mut state.flops,
    );
    let (sw, asw) = sketch_image(a_transpose, s_next, &w_next, &mut state.flops);
    let sw_nsq = sw.norm_sq();
    let asw_nsq = asw.norm_sq();
    state.flops.scalars(2);

    state.tau = if state.sigma == 0.0 {
        0.0
    } else {
        state.flops.scalars(2);
        -(asw.dot_dense(&state.u) + lambda * sw.dot_dense(&state.p)) / state.sigma
    };

    if state.tau != 0.0 {
        state.p *= state.tau;
        state.u *= state.tau;
        state.flops.full_dim(state.p.len());
        state.flops.full_dim(state.u.len());
    } else {
        state.p.fill(0.0);
        state.u.fill(0.0);
    }
    sw.axpy_into(1.0, &mut state.p);
    asw.axpy_into(1.0, &mut state.u);
    state.flops.sketched(sw.touched() + asw.touched());

    let mut sigma_next = -state.tau * state.tau * state.sigma + lambda * sw_nsq + asw_nsq;
    state.flops.scalars(2);
    if sigma_next <= 0.0 {
        sigma_next = state.u.norm_squared() + lambda * state.p.norm_squared();
        state.flops.full_dim(state.u.len());
        state.flops.full_dim(state.p.len());
        state.rescue_events += 1;
    }
    state.sigma = sigma_next;
    state.w = w_next;
    state.w_nsq = state.w.norm_squared();
    state.flops.scalars(1);
    state.k += 1;
}
