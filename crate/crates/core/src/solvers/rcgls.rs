//! The randomized CGLS engine.
//!
//! Each iteration takes an exact-line-search step along a direction that
//! combines the current randomized coordinate gradient `S S^T A^T r` with a
//! conjugacy correction against the previous direction, keeping consecutive
//! directions orthogonal in the `A^T A` inner product. The next sketch is
//! drawn before the direction update: `S_{k+1}` enters `tau_k`, `p^{k+1}`,
//! and `v^{k+1}`.

use nalgebra::DVector;

use crate::flops::FlopCounter;
use crate::linalg::ColumnOp;
use crate::sketch::SketchSample;

use super::common::{operator_is_zero, sample_fits, sketch_image, transpose_sketch};
use super::SolverError;

/// Live iterate bundle: `x`, the residual `r = b - Ax`, the search direction
/// `p`, its image `v = Ap`, and the last stepsize / conjugacy coefficients.
#[derive(Debug, Clone)]
pub struct RcglsState {
    pub x: DVector<f64>,
    pub r: DVector<f64>,
    pub p: DVector<f64>,
    pub v: DVector<f64>,
    pub mu: f64,
    pub tau: f64,
    pub k: usize,
    pub flops: FlopCounter,
    /// `||S_k^T A^T r^k||^2`, maintained alongside `p`.
    pub(crate) sketched_grad_nsq: f64,
    pub(crate) v_nsq: f64,
    /// `||A^T b||`, the scale for zero tests.
    pub(crate) grad_scale: f64,
}

impl RcglsState {
    pub fn sketched_grad_norm_sq(&self) -> f64 {
        self.sketched_grad_nsq
    }

    pub fn grad_scale(&self) -> f64 {
        self.grad_scale
    }
}

pub fn rcgls_init<O: ColumnOp + ?Sized>(
    op: &O,
    b: &DVector<f64>,
    x0: &DVector<f64>,
    s0: &SketchSample,
) -> Result<RcglsState, SolverError> {
    validate_inputs(op, b, x0)?;
    if !sample_fits(s0, op) {
        return Err(SolverError::SampleMismatch);
    }
    let mut flops = FlopCounter::new();

    let r = if x0.iter().all(|&z| z == 0.0) {
        b.clone()
    } else {
        flops.full_dim(op.full_product_cost());
        b - op.apply(x0)
    };
    flops.full_dim(op.full_product_cost());
    let grad_scale = op.apply_transpose(b).norm();

    let t = transpose_sketch(op, s0, &r, &mut flops);
    let sketched_grad_nsq = t.norm_squared();
    flops.scalars(1);
    let (g, ag) = sketch_image(op, s0, &t, &mut flops);
    let v_nsq = ag.norm_sq();
    flops.scalars(1);

    Ok(RcglsState {
        x: x0.clone(),
        r,
        p: g.to_dense(),
        v: ag.to_dense(),
        mu: 0.0,
        tau: 0.0,
        k: 0,
        flops,
        sketched_grad_nsq,
        v_nsq,
        grad_scale,
    })
}

/// Stepsize stage: `x`, `r` move along the current direction. A sketched
/// gradient at or below `zero_threshold * ||A^T b||` freezes the iterate
/// (0/0 = 0).
pub fn rcgls_advance(state: &mut RcglsState, zero_threshold: f64) {
    let floor = zero_threshold * state.grad_scale;
    if state.sketched_grad_nsq <= floor * floor || state.v_nsq == 0.0 {
        state.mu = 0.0;
        return;
    }
    state.mu = state.sketched_grad_nsq / state.v_nsq;
    state.flops.scalars(1);
    let mu = state.mu;
    state.x.axpy(mu, &state.p.clone(), 1.0);
    state.r.axpy(-mu, &state.v.clone(), 1.0);
    state.flops.full_dim(state.x.len());
    state.flops.full_dim(state.r.len());
}

/// Direction stage with the next sketch: updates `tau`, `p`, `v` and the
/// cached scalars.
pub fn rcgls_redirect<O: ColumnOp + ?Sized>(
    state: &mut RcglsState,
    op: &O,
    s_next: &SketchSample,
) {
    debug_assert!(sample_fits(s_next, op));
    let t = transpose_sketch(op, s_next, &state.r, &mut state.flops);
    let (g, ag) = sketch_image(op, s_next, &t, &mut state.flops);

    let dot_agv = ag.dot_dense(&state.v);
    state.flops.scalars(1);
    state.tau = if state.v_nsq == 0.0 {
        0.0
    } else {
        state.flops.scalars(1);
        -dot_agv / state.v_nsq
    };

    if state.tau != 0.0 {
        state.p *= state.tau;
        state.v *= state.tau;
        state.flops.full_dim(state.p.len());
        state.flops.full_dim(state.v.len());
    } else {
        state.p.fill(0.0);
        state.v.fill(0.0);
    }
    g.axpy_into(1.0, &mut state.p);
    ag.axpy_into(1.0, &mut state.v);
    state.flops.sketched(g.touched());
    state.flops.sketched(ag.touched());

    state.v_nsq = state.v.norm_squared();
    state.flops.full_dim(state.v.len());
    state.sketched_grad_nsq = t.norm_squared();
    state.flops.scalars(1);
    state.k += 1;
}

/// One full iteration: stepsize stage, then the direction stage with
/// `s_next`.
pub fn rcgls_step<O: ColumnOp + ?Sized>(
    state: &mut RcglsState,
    op: &O,
    s_next: &SketchSample,
    zero_threshold: f64,
) {
    rcgls_advance(state, zero_threshold);
    rcgls_redirect(state, op, s_next);
}

pub(crate) fn validate_inputs<O: ColumnOp + ?Sized>(
    op: &O,
    b: &DVector<f64>,
    x0: &DVector<f64>,
) -> Result<(), SolverError> {
    if b.len() != op.nrows() {
        return Err(SolverError::DimensionMismatch {
            what: "right-hand side",
            expected: op.nrows(),
            got: b.len(),
        });
    }
    if x0.len() != op.ncols() {
        return Err(SolverError::DimensionMismatch {
            what: "initial iterate",
            expected: op.ncols(),
            got: x0.len(),
        });
    }
    if operator_is_zero(op) {
        return Err(SolverError::ZeroOperator);
    }
    Ok(())
}
