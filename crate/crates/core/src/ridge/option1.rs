//! Ridge iteration in the column space (sketches live in dimension `d`).
//!
//! Works on the structured block `[A; -sqrt(l) I]` without forming it: the
//! augmented residual is carried as the partial residual `g = b - Ax`
//! together with `x` itself, and the sketched gradient becomes
//! `w = S^T A^T g - l S^T x`.

use nalgebra::DVector;

use crate::flops::FlopCounter;
use crate::linalg::{ColumnOp, Matrix, RidgeProblem};
use crate::sketch::SketchSample;
use crate::solvers::SolverError;
use crate::solvers::{restrict, sketch_image, transpose_sketch};

#[derive(Debug, Clone)]
pub struct RidgeStateI {
    pub x: DVector<f64>,
    /// Partial residual `b - Ax`.
    pub g: DVector<f64>,
    /// Sketched gradient of the separable objective.
    pub w: DVector<f64>,
    pub p: DVector<f64>,
    /// `A p`.
    pub u: DVector<f64>,
    /// `sigma = ||u||^2 + lambda ||p||^2`.
    pub sigma: f64,
    pub tau: f64,
    pub mu: f64,
    pub k: usize,
    pub flops: FlopCounter,
    pub rescue_events: u64,
    pub(crate) w_nsq: f64,
    pub(crate) grad_scale: f64,
}

fn sketched_gradient(
    a: &Matrix,
    lambda: f64,
    s: &SketchSample,
    g: &DVector<f64>,
    x: &DVector<f64>,
    flops: &mut FlopCounter,
) -> DVector<f64> {
    let mut w = transpose_sketch(a, s, g, flops);
    let sx = restrict(s, x, flops);
    w.axpy(-lambda, &sx, 1.0);
    flops.sketched(w.len());
    w
}

pub fn ridge_option1_init(
    problem: &RidgeProblem,
    x0: &DVector<f64>,
    s0: &SketchSample,
) -> Result<RidgeStateI, SolverError> {
    let a = &problem.a_bar;
    if x0.len() != a.ncols() {
        return Err(SolverError::DimensionMismatch {
            what: "initial iterate",
            expected: a.ncols(),
            got: x0.len(),
        });
    }
    if a.is_zero() {
        return Err(SolverError::ZeroOperator);
    }
    let lambda = problem.lambda;
    let mut flops = FlopCounter::new();

    let g = if x0.iter().all(|&z| z == 0.0) {
        problem.b_bar.clone()
    } else {
        flops.full_dim(a.full_product_cost());
        &problem.b_bar - ColumnOp::apply(a, x0)
    };
    flops.full_dim(a.full_product_cost());
    let grad_scale = ColumnOp::apply_transpose(a, &problem.b_bar).norm();

    let w = sketched_gradient(a, lambda, s0, &g, x0, &mut flops);
    let w_nsq = w.norm_squared();
    flops.scalars(1);
    let (sw, asw) = sketch_image(a, s0, &w, &mut flops);
    let sigma = asw.norm_sq() + lambda * sw.norm_sq();
    flops.scalars(3);

    Ok(RidgeStateI {
        x: x0.clone(),
        g,
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

/// One iteration: exact-line-search move, then the conjugacy-corrected
/// direction update with the next sketch. A sketched gradient at or below
/// `zero_threshold * ||A^T b||` freezes the iterate.
pub fn ridge_option1_step(
    state: &mut RidgeStateI,
    problem: &RidgeProblem,
    s_next: &SketchSample,
    zero_threshold: f64,
) {
    let a = &problem.a_bar;
    let lambda = problem.lambda;

    let floor = zero_threshold * state.grad_scale;
    if state.w_nsq > floor * floor && state.sigma > 0.0 {
        state.mu = state.w_nsq / state.sigma;
        state.flops.scalars(1);
        let mu = state.mu;
        state.x.axpy(mu, &state.p.clone(), 1.0);
        state.g.axpy(-mu, &state.u.clone(), 1.0);
        state.flops.full_dim(state.x.len());
        state.flops.full_dim(state.g.len());
    } else {
        state.mu = 0.0;
    }

    let w_next = sketched_gradient(a, lambda, s_next, &state.g, &state.x, &mut state.flops);
    let (sw, asw) = sketch_image(a, s_next, &w_next, &mut state.flops);
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
        // The recurrence is exact-arithmetic only; rebuild from the stored
        // direction pair and record the rescue.
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
