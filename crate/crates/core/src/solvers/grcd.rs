//! Generalized randomized coordinate descent: one exact-line-search step
//! along the randomized coordinate gradient `S S^T A^T r`, with no
//! conjugate memory. Under the column-norm-weighted single-coordinate
//! distribution this is exactly the classical RCD update.

use nalgebra::DVector;

use crate::flops::FlopCounter;
use crate::linalg::ColumnOp;
use crate::sketch::SketchSample;

use super::common::{sample_fits, sketch_image, transpose_sketch};
use super::rcgls::validate_inputs;
use super::SolverError;

#[derive(Debug, Clone)]
pub struct GrcdState {
    pub x: DVector<f64>,
    pub r: DVector<f64>,
    /// Last exact-line-search stepsize.
    pub alpha: f64,
    pub k: usize,
    pub flops: FlopCounter,
    pub(crate) grad_scale: f64,
    pub(crate) last_grad_nsq: f64,
}

pub fn grcd_init<O: ColumnOp + ?Sized>(
    op: &O,
    b: &DVector<f64>,
    x0: &DVector<f64>,
) -> Result<GrcdState, SolverError> {
    validate_inputs(op, b, x0)?;
    let mut flops = FlopCounter::new();
    let r = if x0.iter().all(|&z| z == 0.0) {
        b.clone()
    } else {
        flops.full_dim(op.full_product_cost());
        b - op.apply(x0)
    };
    flops.full_dim(op.full_product_cost());
    let grad_scale = op.apply_transpose(b).norm();
    Ok(GrcdState {
        x: x0.clone(),
        r,
        alpha: 0.0,
        k: 0,
        flops,
        grad_scale,
        last_grad_nsq: f64::INFINITY,
    })
}

/// One coordinate-gradient step; a sketched gradient at or below
/// `zero_threshold * ||A^T b||` leaves the iterate unchanged.
pub fn grcd_step<O: ColumnOp + ?Sized>(
    state: &mut GrcdState,
    op: &O,
    s: &SketchSample,
    zero_threshold: f64,
) {
    debug_assert!(sample_fits(s, op));
    let t = transpose_sketch(op, s, &state.r, &mut state.flops);
    let t_nsq = t.norm_squared();
    state.flops.scalars(1);
    state.last_grad_nsq = t_nsq;

    let floor = zero_threshold * state.grad_scale;
    if t_nsq <= floor * floor {
        state.alpha = 0.0;
        state.k += 1;
        return;
    }

    let (g, ag) = sketch_image(op, s, &t, &mut state.flops);
    let ag_nsq = ag.norm_sq();
    state.flops.scalars(1);
    if ag_nsq == 0.0 {
        state.alpha = 0.0;
        state.k += 1;
        return;
    }
    state.alpha = t_nsq / ag_nsq;
    state.flops.scalars(1);
    g.axpy_into(state.alpha, &mut state.x);
    ag.axpy_into(-state.alpha, &mut state.r);
    state.flops.sketched(g.touched() + ag.touched());
    state.k += 1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{direct_oracle, ColumnOp, Matrix};
    use crate::testing;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn weighted_coordinate_step_is_the_rcd_update() {
        for seed in 0..10u64 {
            let a = testing::random_dense(6, 4, 500 + seed);
            let b = testing::random_vector(6, 600 + seed);
            let mut st = grcd_init(&a, &b, &DVector::zeros(4)).unwrap();
            let i = (seed % 4) as usize;
            let scale = 1.0 / a.col_norm_sq(i).sqrt();
            let s = SketchSample::ScaledCoordinate { index: i, scale };
            let expected_move = a.col_dot(i, &st.r) / a.col_norm_sq(i);
            grcd_step(&mut st, &a, &s, f64::EPSILON);
            assert_relative_eq!(st.x[i], expected_move, max_relative = 1e-14);
            for j in 0..4 {
                if j != i {
                    assert_eq!(st.x[j], 0.0);
                }
            }
        }
    }

    #[test]
    fn hand_computed_coordinate_step() {
        let a = Matrix::from_dense(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let mut st = grcd_init(&a, &b, &DVector::zeros(2)).unwrap();
        let s = SketchSample::ScaledCoordinate { index: 1, scale: 0.5 };
        grcd_step(&mut st, &a, &s, f64::EPSILON);
        assert_relative_eq!(st.x, DVector::from_vec(vec![0.0, 1.0]), max_relative = 1e-14);
        assert_relative_eq!(st.r, DVector::from_vec(vec![1.0, 0.0]), max_relative = 1e-14);
    }

    #[test]
    fn no_op_at_the_solution() {
        let a = testing::random_dense(5, 3, 700);
        let b = testing::random_vector(5, 701);
        let x_star = direct_oracle(&a, &b, 0.0).unwrap().x_star;
        let mut st = grcd_init(&a, &b, &x_star).unwrap();
        let s = SketchSample::Identity { ambient: 3 };
        grcd_step(&mut st, &a, &s, f64::EPSILON);
        assert_eq!(st.alpha, 0.0);
        assert_relative_eq!(st.x, x_star, max_relative = 1e-15);
    }
}
