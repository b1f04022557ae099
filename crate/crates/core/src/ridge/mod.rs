//! Ridge regression through the block-orthogonal augmented reformulation.
//!
//! The augmented operator splits into column blocks `U = [sqrt(l) I; A^T]`
//! and `V = [A; -sqrt(l) I]` with `V^T U = 0`, so the regularized problem
//! separates into two independent least-squares problems: Option I solves
//! in the column space (sketches live in dimension `d`), Option II solves
//! for the auxiliary variable (sketches live in dimension `n`) and recovers
//! `x = A^T y / sqrt(l)`.

mod grcd;
mod option1;
mod option2;
mod runner;

pub use grcd::{
    ridge_grcd1_init, ridge_grcd1_step, ridge_grcd2_init, ridge_grcd2_step, RidgeGrcd1State,
    RidgeGrcd2State,
};
pub use option1::{ridge_option1_init, ridge_option1_step, RidgeStateI};
pub use option2::{ridge_option2_init, ridge_option2_step, RidgeStateII};
pub use runner::{run_ridge, RidgeMethod};

use nalgebra::{DMatrix, DVector};

use crate::linalg::{ColumnOp, LinalgError, Matrix, RidgeProblem};

/// Ridge solver variant selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionChoice {
    Auto,
    OptionI,
    OptionII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedOption {
    OptionI,
    OptionII,
}

/// What the caller can read from the coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessPattern {
    RowsOnly,
    ColumnsOnly,
    Both,
}

/// The column-information clause dominates; with both kinds of access the
/// smaller sketching dimension wins, ties going to Option I.
pub fn select_option(n: usize, d: usize, access: AccessPattern) -> ResolvedOption {
    match access {
        AccessPattern::ColumnsOnly => ResolvedOption::OptionI,
        AccessPattern::RowsOnly => ResolvedOption::OptionII,
        AccessPattern::Both => {
            if n >= d {
                ResolvedOption::OptionI
            } else {
                ResolvedOption::OptionII
            }
        }
    }
}

/// Default size cutoff above which the augmented operator refuses to
/// materialize densely.
pub const DENSE_AUGMENTED_CUTOFF: usize = 2048;

/// Structured view of the augmented system: the stacked right-hand side and
/// the column blocks `U`, `V`, never materialized unless small.
pub struct AugmentedSystem<'a> {
    problem: &'a RidgeProblem,
    /// Transpose of the coefficient matrix, stored for row access.
    a_transpose: Matrix,
    pub sqrt_lambda: f64,
    pub dense_cutoff: usize,
}

pub fn build_augmented(problem: &RidgeProblem) -> Result<AugmentedSystem<'_>, LinalgError> {
    if problem.lambda <= 0.0 || problem.lambda.is_nan() {
        return Err(LinalgError::NonPositiveLambda(problem.lambda));
    }
    Ok(AugmentedSystem {
        problem,
        a_transpose: problem.a_bar.transpose(),
        sqrt_lambda: problem.lambda.sqrt(),
        dense_cutoff: DENSE_AUGMENTED_CUTOFF,
    })
}

impl<'a> AugmentedSystem<'a> {
    pub fn n(&self) -> usize {
        self.problem.nrows()
    }

    pub fn d(&self) -> usize {
        self.problem.ncols()
    }

    /// `b_hat = (b; 0)`.
    pub fn b_hat(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.n() + self.d());
        out.rows_mut(0, self.n()).copy_from(&self.problem.b_bar);
        out
    }

    pub fn v_block(&self) -> VBlock<'_> {
        VBlock {
            a: &self.problem.a_bar,
            sqrt_lambda: self.sqrt_lambda,
        }
    }

    pub fn u_block(&self) -> UBlock<'_> {
        UBlock {
            a_transpose: &self.a_transpose,
            sqrt_lambda: self.sqrt_lambda,
        }
    }

    /// Transpose view of the coefficient matrix (row access).
    pub fn a_transpose(&self) -> &Matrix {
        &self.a_transpose
    }

    /// Dense `(n+d) x (n+d)` augmented matrix, available only below the
    /// cutoff.
    pub fn a_hat_dense(&self) -> Option<DMatrix<f64>> {
        let (n, d) = (self.n(), self.d());
        if n + d > self.dense_cutoff {
            return None;
        }
        let a = self.problem.a_bar.to_dense();
        let mut out = DMatrix::zeros(n + d, n + d);
        for i in 0..n {
            out[(i, i)] = self.sqrt_lambda;
        }
        out.view_mut((0, n), (n, d)).copy_from(&a);
        out.view_mut((n, 0), (d, n)).copy_from(&a.transpose());
        for j in 0..d {
            out[(n + j, n + j)] = -self.sqrt_lambda;
        }
        Some(out)
    }

    /// Largest entry of `V^T U`; the analytic identity makes it vanish.
    pub fn block_orthogonality_defect(&self) -> f64 {
        let u = self.u_block();
        let v = self.v_block();
        let mut worst: f64 = 0.0;
        for j in 0..v.ncols() {
            let mut col = DVector::zeros(v.nrows());
            v.for_col(j, &mut |i, val| col[i] += val);
            for i in 0..u.ncols() {
                worst = worst.max(u.col_dot(i, &col).abs());
            }
        }
        worst
    }
}

/// Column block `V = [A; -sqrt(l) I]`, shape `(n+d) x d`.
pub struct VBlock<'a> {
    a: &'a Matrix,
    sqrt_lambda: f64,
}

impl ColumnOp for VBlock<'_> {
    fn nrows(&self) -> usize {
        self.a.nrows() + self.a.ncols()
    }

    fn ncols(&self) -> usize {
        self.a.ncols()
    }

    fn col_nnz(&self, j: usize) -> usize {
        ColumnOp::col_nnz(self.a, j) + 1
    }

    fn col_dot(&self, j: usize, v: &DVector<f64>) -> f64 {
        let n = self.a.nrows();
        self.a.col_dot(j, &v.rows(0, n).into_owned()) - self.sqrt_lambda * v[n + j]
    }

    fn for_col(&self, j: usize, f: &mut dyn FnMut(usize, f64)) {
        let n = self.a.nrows();
        self.a.for_col(j, f);
        f(n + j, -self.sqrt_lambda);
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let (n, d) = (self.a.nrows(), self.a.ncols());
        let mut out = DVector::zeros(n + d);
        out.rows_mut(0, n).copy_from(&ColumnOp::apply(self.a, x));
        out.rows_mut(n, d).axpy(-self.sqrt_lambda, x, 1.0);
        out
    }

    fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        let (n, d) = (self.a.nrows(), self.a.ncols());
        let top = y.rows(0, n).into_owned();
        let mut out = ColumnOp::apply_transpose(self.a, &top);
        out.axpy(-self.sqrt_lambda, &y.rows(n, d).into_owned(), 1.0);
        out
    }

    fn full_product_cost(&self) -> usize {
        self.a.full_product_cost() + self.a.ncols()
    }
}

/// Column block `U = [sqrt(l) I; A^T]`, shape `(n+d) x n`; columns reach
/// rows of the coefficient matrix through the stored transpose.
pub struct UBlock<'a> {
    a_transpose: &'a Matrix,
    sqrt_lambda: f64,
}

impl ColumnOp for UBlock<'_> {
    fn nrows(&self) -> usize {
        self.a_transpose.nrows() + self.a_transpose.ncols()
    }

    fn ncols(&self) -> usize {
        self.a_transpose.ncols()
    }

    fn col_nnz(&self, i: usize) -> usize {
        1 + ColumnOp::col_nnz(self.a_transpose, i)
    }

    fn col_dot(&self, i: usize, v: &DVector<f64>) -> f64 {
        let n = self.a_transpose.ncols();
        let d = self.a_transpose.nrows();
        self.sqrt_lambda * v[i]
            + self
                .a_transpose
                .col_dot(i, &v.rows(n, d).into_owned())
    }

    fn for_col(&self, i: usize, f: &mut dyn FnMut(usize, f64)) {
        let n = self.a_transpose.ncols();
        f(i, self.sqrt_lambda);
        self.a_transpose.for_col(i, &mut |row, val| f(n + row, val));
    }

    fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.a_transpose.ncols();
        let d = self.a_transpose.nrows();
        let mut out = DVector::zeros(n + d);
        out.rows_mut(0, n).axpy(self.sqrt_lambda, y, 1.0);
        out.rows_mut(n, d)
            .copy_from(&ColumnOp::apply(self.a_transpose, y));
        out
    }

    fn apply_transpose(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.a_transpose.ncols();
        let d = self.a_transpose.nrows();
        let mut out = v.rows(0, n).into_owned() * self.sqrt_lambda;
        let bottom = v.rows(n, d).into_owned();
        out += ColumnOp::apply_transpose(self.a_transpose, &bottom);
        out
    }

    fn full_product_cost(&self) -> usize {
        self.a_transpose.full_product_cost() + self.a_transpose.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn scalar_blocks_are_orthogonal() {
        let problem = RidgeProblem::new(
            Matrix::from_dense(DMatrix::from_row_slice(1, 1, &[2.0])),
            DVector::from_vec(vec![4.0]),
            1.0,
        )
        .unwrap();
        let aug = build_augmented(&problem).unwrap();
        let v = aug.v_block();
        let mut col = DVector::zeros(2);
        v.for_col(0, &mut |i, val| col[i] = val);
        assert_eq!(col, DVector::from_vec(vec![2.0, -1.0]));
        let u = aug.u_block();
        let mut ucol = DVector::zeros(2);
        u.for_col(0, &mut |i, val| ucol[i] = val);
        assert_eq!(ucol, DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(aug.block_orthogonality_defect(), 0.0);
    }

    #[test]
    fn random_blocks_are_orthogonal_to_scale() {
        let a = testing::random_dense(5, 3, 40);
        let lambda: f64 = 0.05;
        let scale = lambda.sqrt() * a.frobenius_norm_sq().sqrt();
        let problem = RidgeProblem::new(a, testing::random_vector(5, 41), lambda).unwrap();
        let aug = build_augmented(&problem).unwrap();
        assert!(aug.block_orthogonality_defect() <= 1e-12 * scale);
    }

    #[test]
    fn stacked_rhs_has_zero_lower_block() {
        let problem = RidgeProblem::new(
            testing::random_dense(4, 2, 42),
            testing::random_vector(4, 43),
            0.5,
        )
        .unwrap();
        let aug = build_augmented(&problem).unwrap();
        let bh = aug.b_hat();
        assert_eq!(bh.rows(4, 2).into_owned(), DVector::zeros(2));
    }

    #[test]
    fn blocks_match_dense_augmented_matrix() {
        let problem = RidgeProblem::new(
            testing::random_dense(4, 3, 44),
            testing::random_vector(4, 45),
            0.3,
        )
        .unwrap();
        let aug = build_augmented(&problem).unwrap();
        let dense = aug.a_hat_dense().unwrap();
        // Column block U is the first n columns, V the last d.
        let u = aug.u_block();
        let v = aug.v_block();
        for i in 0..4 {
            let mut col = DVector::zeros(7);
            u.for_col(i, &mut |r, val| col[r] += val);
            assert_relative_eq!(col, dense.column(i).into_owned(), max_relative = 1e-14);
        }
        for j in 0..3 {
            let mut col = DVector::zeros(7);
            v.for_col(j, &mut |r, val| col[r] += val);
            assert_relative_eq!(col, dense.column(4 + j).into_owned(), max_relative = 1e-14);
        }
        // apply / apply_transpose agree with the dense view.
        let xs = testing::random_vector(3, 46);
        let full = testing::random_vector(7, 47);
        assert_relative_eq!(
            v.apply(&xs),
            dense.columns(4, 3) * &xs,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            v.apply_transpose(&full),
            dense.columns(4, 3).transpose() * &full,
            max_relative = 1e-13
        );
        let ys = testing::random_vector(4, 48);
        assert_relative_eq!(
            u.apply(&ys),
            dense.columns(0, 4) * &ys,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            u.apply_transpose(&full),
            dense.columns(0, 4).transpose() * &full,
            max_relative = 1e-13
        );
    }

    #[test]
    fn dense_materialization_respects_cutoff() {
        let problem = RidgeProblem::new(
            testing::random_dense(4, 3, 49),
            testing::random_vector(4, 50),
            0.3,
        )
        .unwrap();
        let mut aug = build_augmented(&problem).unwrap();
        aug.dense_cutoff = 5;
        assert!(aug.a_hat_dense().is_none());
    }

    #[test]
    fn option_selection_rules() {
        assert_eq!(
            select_option(100, 100, AccessPattern::Both),
            ResolvedOption::OptionI
        );
        assert_eq!(
            select_option(10, 500, AccessPattern::Both),
            ResolvedOption::OptionII
        );
        assert_eq!(
            select_option(10, 500, AccessPattern::ColumnsOnly),
            ResolvedOption::OptionI
        );
        assert_eq!(
            select_option(500, 10, AccessPattern::RowsOnly),
            ResolvedOption::OptionII
        );
    }
}
