//! Coordinate-gradient baseline for ridge: one exact-line-search step on
//! the separable reformulation, no conjugate memory. Shares the option
//! machinery so the baseline always attacks the same subproblem as the
//! accelerated engine.

use nalgebra::DVector;

use crate::flops::FlopCounter;
use crate::linalg::{ColumnOp, Matrix, RidgeProblem};
use crate::sketch::SketchSample;
use crate::solvers::SolverError;
use crate::solvers::{restrict, sketch_image, transpose_sketch};

#[derive(Debug, Clone)]
pub struct RidgeGrcd1State {
    pub x: DVector<f64>,
    pub g: DVector<f64>,
    pub alpha: f64,
    pub k: usize,
    pub flops: FlopCounter,
    pub(crate) grad_scale: f64,
}

pub fn ridge_grcd1_init(
    problem: &RidgeProblem,
    x0: &DVector<f64>,
) -> Result<RidgeGrcd1State, SolverError> {
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
    let mut flops = FlopCounter::new();
    let g = if x0.iter().all(|&z| z == 0.0) {
        problem.b_bar.clone()
    } else {
        flops.full_dim(a.full_product_cost());
        &problem.b_bar - ColumnOp::apply(a, x0)
    };
    flops.full_dim(a.full_product_cost());
    let grad_scale = ColumnOp::apply_transpose(a, &problem.b_bar).norm();
    Ok(RidgeGrcd1State {
        x: x0.clone(),
        g,
        alpha: 0.0,
        k: 0,
        flops,
        grad_scale,
    })
}

pub fn ridge_grcd1_step(
    state: &mut RidgeGrcd1State,
    problem: &RidgeProblem,
    s: &SketchSample,
    zero_threshold: f64,
) {
    let a = &problem.a_bar;
    let lambda = problem.lambda;

    let mut w = transpose_sketch(a, s, &state.g, &mut state.flops);
    let sx = restrict(s, &state.x, &mut state.flops);
    w.axpy(-lambda, &sx, 1.0);
    state.flops.sketched(w.len());
    let w_nsq = w.norm_squared();
    state.flops.scalars(1);

    let floor = zero_threshold * state.grad_scale;
    if w_nsq <= floor * floor {
        state.alpha = 0.0;
        state.k += 1;
        return;
    }
    let (sw, asw) = sketch_image(a, s, &w, &mut state.flops);
    let denom = asw.norm_sq() + lambda * sw.norm_sq();
    state.flops.scalars(3);
    if denom == 0.0 {
        state.alpha = 0.0;
        state.k += 1;
        return;
    }
    state.alpha = w_nsq / denom;
    state.flops.scalars(1);
    sw.axpy_into(state.alpha, &mut state.x);
    asw.axpy_into(-state.alpha, &mut state.g);
    state.flops.sketched(sw.touched() + asw.touched());
    state.k += 1;
}

#[derive(Debug, Clone)]
pub struct RidgeGrcd2State {
    pub y: DVector<f64>,
    pub x: DVector<f64>,
    pub alpha: f64,
    pub k: usize,
    pub flops: FlopCounter,
    pub(crate) grad_scale: f64,
}

pub fn ridge_grcd2_init(
    problem: &RidgeProblem,
    a_transpose: &Matrix,
    y0: &DVector<f64>,
) -> Result<RidgeGrcd2State, SolverError> {
    if y0.len() != problem.nrows() {
        return Err(SolverError::DimensionMismatch {
            what: "initial auxiliary iterate",
            expected: problem.nrows(),
            got: y0.len(),
        });
    }
    if problem.a_bar.is_zero() {
        return Err(SolverError::ZeroOperator);
    }
    let sqrt_l = problem.lambda.sqrt();
    let mut flops = FlopCounter::new();
    let x0 = if y0.iter().all(|&z| z == 0.0) {
        DVector::zeros(problem.ncols())
    } else {
        flops.full_dim(a_transpose.full_product_cost());
        ColumnOp::apply(a_transpose, y0) / sqrt_l
    };
    let grad_scale = sqrt_l * problem.b_bar.norm();
    Ok(RidgeGrcd2State {
        y: y0.clone(),
        x: x0,
        alpha: 0.0,
        k: 0,
        flops,
        grad_scale,
    })
}

pub fn ridge_grcd2_step(
    state: &mut RidgeGrcd2State,
    problem: &RidgeProblem,
    a_transpose: &Matrix,
    s: &SketchSample,
    zero_threshold: f64,
) {
    let lambda = problem.lambda;
    let sqrt_l = lambda.sqrt();

    let mut w = restrict(s, &problem.b_bar, &mut state.flops) * sqrt_l;
    let sax = transpose_sketch(a_transpose, s, &state.x, &mut state.flops);
    w.axpy(-sqrt_l, &sax, 1.0);
    let sy = restrict(s, &state.y, &mut state.flops);
    w.axpy(-lambda, &sy, 1.0);
    state.flops.sketched(2 * w.len());
    let w_nsq = w.norm_squared();
    state.flops.scalars(1);

    let floor = zero_threshold * state.grad_scale;
    if w_nsq <= floor * floor {
        state.alpha = 0.0;
        state.k += 1;
        return;
    }
    let (sw, asw) = sketch_image(a_transpose, s, &w, &mut state.flops);
    let denom = asw.norm_sq() + lambda * sw.norm_sq();
    state.flops.scalars(3);
    if denom == 0.0 {
        state.alpha = 0.0;
        state.k += 1;
        return;
    }
    state.alpha = w_nsq / denom;
    state.flops.scalars(1);
    sw.axpy_into(state.alpha, &mut state.y);
    asw.axpy_into(state.alpha / sqrt_l, &mut state.x);
    state.flops.sketched(sw.touched() + asw.touched());
    state.flops.scalars(1);
    state.k += 1;
}
