//! Classical CGLS: conjugate gradient applied implicitly to the normal
//! equations, updating the original residual `r = b - Ax`.

use nalgebra::DVector;

use crate::flops::FlopCounter;
use crate::linalg::ColumnOp;

use super::rcgls::{validate_inputs, RcglsState};
use super::SolverError;

pub fn cgls_init<O: ColumnOp + ?Sized>(
    op: &O,
    b: &DVector<f64>,
    x0: &DVector<f64>,
) -> Result<RcglsState, SolverError> {
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

    flops.full_dim(op.full_product_cost());
    let p = op.apply_transpose(&r);
    flops.full_dim(op.full_product_cost());
    let v = op.apply(&p);
    let v_nsq = v.norm_squared();
    flops.full_dim(v.len());
    let sketched_grad_nsq = p.norm_squared();

    Ok(RcglsState {
        x: x0.clone(),
        r,
        p,
        v,
        mu: 0.0,
        tau: 0.0,
        k: 0,
        flops,
        sketched_grad_nsq,
        v_nsq,
        grad_scale,
    })
}

/// The five-line update: exact-line-search stepsize, iterate and residual
/// moves, then the conjugacy coefficient and new direction. The stepsize
/// uses the gradient-norm form of the line-search optimum (the standard
/// CGLS expression); the inner-product form agrees with it only to the
/// stepsize-identity tolerance and would spoil bit-level agreement with the
/// identity-sketched engine. A vanished `||Ap||` makes the step a no-op
/// (0/0 = 0).
pub fn cgls_step<O: ColumnOp + ?Sized>(state: &mut RcglsState, op: &O) {
    if state.v_nsq != 0.0 && state.sketched_grad_nsq != 0.0 {
        state.mu = state.sketched_grad_nsq / state.v_nsq;
        state.flops.scalars(1);
        let mu = state.mu;
        state.x.axpy(mu, &state.p.clone(), 1.0);
        state.r.axpy(-mu, &state.v.clone(), 1.0);
        state.flops.full_dim(state.x.len());
        state.flops.full_dim(state.r.len());
    } else {
        state.mu = 0.0;
    }

    state.flops.full_dim(op.full_product_cost());
    let grad = op.apply_transpose(&state.r);
    state.flops.full_dim(op.full_product_cost());
    let a_grad = op.apply(&grad);

    state.tau = if state.v_nsq == 0.0 {
        0.0
    } else {
        state.flops.full_dim(state.v.len());
        state.flops.scalars(1);
        -a_grad.dot(&state.v) / state.v_nsq
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
    state.p += &grad;
    state.v += &a_grad;
    state.flops.full_dim(state.p.len());
    state.flops.full_dim(state.v.len());

    state.v_nsq = state.v.norm_squared();
    state.flops.full_dim(state.v.len());
    state.sketched_grad_nsq = grad.norm_squared();
    state.k += 1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{direct_oracle, Matrix};
    use crate::testing;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn identity_problem_converges_in_one_step() {
        let a = Matrix::from_dense(DMatrix::identity(4, 4));
        let b = testing::random_vector(4, 1);
        let mut st = cgls_init(&a, &b, &DVector::zeros(4)).unwrap();
        cgls_step(&mut st, &a);
        assert_relative_eq!(st.mu, 1.0, max_relative = 1e-14);
        assert_relative_eq!(st.x, b, max_relative = 1e-12);
    }

    #[test]
    fn finite_termination_on_small_problem() {
        let a = Matrix::from_dense(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 1.0, 1.0]));
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x_star = direct_oracle(&a, &b, 0.0).unwrap().x_star;
        let atb_norm = a.rmatvec(&b).unwrap().norm();
        let mut st = cgls_init(&a, &b, &DVector::zeros(2)).unwrap();
        for _ in 0..2 {
            cgls_step(&mut st, &a);
        }
        let grad = a.rmatvec(&st.r).unwrap();
        assert!(grad.norm() <= 1e-10 * atb_norm, "gradient {}", grad.norm());
        assert_relative_eq!(st.x, x_star, max_relative = 1e-9);
    }

    #[test]
    fn successive_gradients_are_orthogonal() {
        // The property degrades once gradients hit rounding noise, so gate
        // on a healthy gradient.
        let a = testing::random_dense(12, 6, 31);
        let b = testing::random_vector(12, 32);
        let atb_norm = a.rmatvec(&b).unwrap().norm();
        let mut st = cgls_init(&a, &b, &DVector::zeros(6)).unwrap();
        let mut prev_grad = a.rmatvec(&st.r).unwrap();
        for _ in 0..6 {
            cgls_step(&mut st, &a);
            let grad = a.rmatvec(&st.r).unwrap();
            if grad.norm() <= 1e-8 * atb_norm || prev_grad.norm() <= 1e-8 * atb_norm {
                break;
            }
            let cross = grad.dot(&prev_grad).abs();
            let scale = grad.norm() * prev_grad.norm();
            assert!(cross <= 1e-8 * scale, "gradients not orthogonal: {}", cross / scale);
            prev_grad = grad;
        }
    }
}
