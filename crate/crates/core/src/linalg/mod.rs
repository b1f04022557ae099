//! Matrix storage, sketched column operations, LIBSVM ingestion, and the
//! direct-solve oracles used as ground truth by every test.

mod csc;
mod libsvm;
mod oracle;

pub use csc::CscMatrix;
pub use libsvm::{read_libsvm, read_libsvm_with_dim};
pub use oracle::{direct_oracle, MethodTag, SolutionCertificate};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative cutoff under which a singular value counts as zero.
///
/// "Smallest nonzero singular value" everywhere means the smallest one above
/// `RANK_CUTOFF * sigma_max`.
pub const RANK_CUTOFF: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: expected length {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("column index {index} out of range for {ncols} columns")]
    ColumnOutOfRange { index: usize, ncols: usize },
    #[error("row index {index} out of range for {nrows} rows")]
    RowOutOfRange { index: usize, nrows: usize },
    #[error("duplicate index {index} in sketched index set")]
    DuplicateIndex { index: usize },
    #[error("matrix or vector must be non-empty")]
    Empty,
    #[error("all-zero matrix is not accepted here")]
    ZeroMatrix,
    #[error("regularization parameter must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("negative regularization parameter {0}")]
    NegativeLambda(f64),
}

/// Dense or compressed-sparse-column matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix),
}

impl Matrix {
    pub fn from_dense(a: DMatrix<f64>) -> Self {
        Matrix::Dense(a)
    }

    pub fn sparse_from_dense(a: &DMatrix<f64>) -> Self {
        Matrix::Sparse(CscMatrix::from_dense(a))
    }

    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        Ok(Matrix::Sparse(CscMatrix::from_triplets(
            nrows, ncols, triplets,
        )?))
    }

    pub fn nrows(&self) -> usize {
        match self {
            Matrix::Dense(a) => a.nrows(),
            Matrix::Sparse(a) => a.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Matrix::Dense(a) => a.ncols(),
            Matrix::Sparse(a) => a.ncols(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Matrix::Dense(a) => a.iter().filter(|v| **v != 0.0).count(),
            Matrix::Sparse(a) => a.nnz(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Matrix::Dense(a) => a.iter().all(|v| *v == 0.0),
            Matrix::Sparse(a) => a.iter_entries().all(|(_, _, v)| v == 0.0),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Matrix::Dense(a) => a.clone(),
            Matrix::Sparse(a) => a.to_dense(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        match self {
            Matrix::Dense(a) => Matrix::Dense(a.transpose()),
            Matrix::Sparse(a) => Matrix::Sparse(a.transpose()),
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        match self {
            Matrix::Dense(a) => a.iter().map(|v| v * v).sum(),
            Matrix::Sparse(a) => a.iter_entries().map(|(_, _, v)| v * v).sum(),
        }
    }

    /// `A x`.
    pub fn matvec(&self, x: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        if x.len() != self.ncols() {
            return Err(LinalgError::DimensionMismatch {
                op: "matvec",
                expected: self.ncols(),
                got: x.len(),
            });
        }
        Ok(ColumnOp::apply(self, x))
    }

    /// `A^T y`.
    pub fn rmatvec(&self, y: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        if y.len() != self.nrows() {
            return Err(LinalgError::DimensionMismatch {
                op: "rmatvec",
                expected: self.nrows(),
                got: y.len(),
            });
        }
        Ok(ColumnOp::apply_transpose(self, y))
    }

    /// Sketched transpose product: `s_j = <A[:, indices[j]], v> * weight_j`.
    ///
    /// Touches only the nonzeros of the selected columns.
    pub fn sketched_columns_dot(
        &self,
        indices: &[usize],
        weights: Option<&[f64]>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>, LinalgError> {
        self.validate_index_set(indices, weights)?;
        if v.len() != self.nrows() {
            return Err(LinalgError::DimensionMismatch {
                op: "sketched_columns_dot",
                expected: self.nrows(),
                got: v.len(),
            });
        }
        let mut out = DVector::zeros(indices.len());
        for (slot, &j) in indices.iter().enumerate() {
            let w = weights.map_or(1.0, |ws| ws[slot]);
            out[slot] = self.col_dot(j, v) * w;
        }
        Ok(out)
    }

    /// Accumulates `A[:, indices] * (weights .* coeffs)` touching only the
    /// nonzeros of the selected columns.
    pub fn combine_columns(
        &self,
        indices: &[usize],
        weights: Option<&[f64]>,
        coeffs: &DVector<f64>,
    ) -> Result<SupportVec, LinalgError> {
        self.validate_index_set(indices, weights)?;
        if coeffs.len() != indices.len() {
            return Err(LinalgError::DimensionMismatch {
                op: "combine_columns",
                expected: indices.len(),
                got: coeffs.len(),
            });
        }
        Ok(combine_columns(self, indices, weights, coeffs))
    }

    fn validate_index_set(
        &self,
        indices: &[usize],
        weights: Option<&[f64]>,
    ) -> Result<(), LinalgError> {
        if let Some(ws) = weights {
            if ws.len() != indices.len() {
                return Err(LinalgError::DimensionMismatch {
                    op: "sketch weights",
                    expected: indices.len(),
                    got: ws.len(),
                });
            }
        }
        let mut seen = indices.to_vec();
        seen.sort_unstable();
        for pair in seen.windows(2) {
            if pair[0] == pair[1] {
                return Err(LinalgError::DuplicateIndex { index: pair[0] });
            }
        }
        for &j in indices {
            if j >= self.ncols() {
                return Err(LinalgError::ColumnOutOfRange {
                    index: j,
                    ncols: self.ncols(),
                });
            }
        }
        Ok(())
    }
}

/// Column-access view of a linear operator.
///
/// Engines are generic over this trait so the same iteration code runs on a
/// stored matrix and on the structured ridge blocks; dimensions are validated
/// at engine initialization, so trait methods assert instead of returning
/// errors.
pub trait ColumnOp {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn col_nnz(&self, j: usize) -> usize;
    fn col_dot(&self, j: usize, v: &DVector<f64>) -> f64;
    /// Visits the nonzero entries of column `j` as `(row, value)`.
    fn for_col(&self, j: usize, f: &mut dyn FnMut(usize, f64));
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
    fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64>;
    /// Multiply-add cost of one full product (`apply` or `apply_transpose`).
    fn full_product_cost(&self) -> usize;

    fn col_norm_sq(&self, j: usize) -> f64 {
        let mut acc = 0.0;
        self.for_col(j, &mut |_, v| acc += v * v);
        acc
    }
}

impl ColumnOp for Matrix {
    fn nrows(&self) -> usize {
        Matrix::nrows(self)
    }

    fn ncols(&self) -> usize {
        Matrix::ncols(self)
    }

    fn col_nnz(&self, j: usize) -> usize {
        match self {
            Matrix::Dense(a) => a.nrows(),
            Matrix::Sparse(a) => a.col_nnz(j),
        }
    }

    fn col_dot(&self, j: usize, v: &DVector<f64>) -> f64 {
        match self {
            Matrix::Dense(a) => a.column(j).dot(v),
            Matrix::Sparse(a) => {
                let (rows, vals) = a.col(j);
                rows.iter().zip(vals).map(|(&i, &x)| x * v[i]).sum()
            }
        }
    }

    fn for_col(&self, j: usize, f: &mut dyn FnMut(usize, f64)) {
        match self {
            Matrix::Dense(a) => {
                for i in 0..a.nrows() {
                    let v = a[(i, j)];
                    if v != 0.0 {
                        f(i, v);
                    }
                }
            }
            Matrix::Sparse(a) => {
                let (rows, vals) = a.col(j);
                for (&i, &v) in rows.iter().zip(vals) {
                    f(i, v);
                }
            }
        }
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols(), "matvec dimension mismatch");
        match self {
            Matrix::Dense(a) => a * x,
            Matrix::Sparse(a) => {
                let mut out = DVector::zeros(a.nrows());
                for j in 0..a.ncols() {
                    let xj = x[j];
                    if xj == 0.0 {
                        continue;
                    }
                    let (rows, vals) = a.col(j);
                    for (&i, &v) in rows.iter().zip(vals) {
                        out[i] += v * xj;
                    }
                }
                out
            }
        }
    }

    fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(y.len(), self.nrows(), "rmatvec dimension mismatch");
        // Column-by-column so a full-index sketched product reproduces this
        // bit for bit.
        match self {
            Matrix::Dense(a) => {
                DVector::from_fn(a.ncols(), |j, _| a.column(j).dot(y))
            }
            Matrix::Sparse(a) => {
                let mut out = DVector::zeros(a.ncols());
                for j in 0..a.ncols() {
                    let (rows, vals) = a.col(j);
                    out[j] = rows.iter().zip(vals).map(|(&i, &v)| v * y[i]).sum();
                }
                out
            }
        }
    }

    fn full_product_cost(&self) -> usize {
        match self {
            Matrix::Dense(a) => a.nrows() * a.ncols(),
            Matrix::Sparse(a) => a.nnz(),
        }
    }
}

/// Sum of `coeffs[slot] * weight[slot] * col(indices[slot])`, entries merged
/// and row-sorted. Work is proportional to the nonzeros of the selected
/// columns.
pub fn combine_columns<O: ColumnOp + ?Sized>(
    op: &O,
    indices: &[usize],
    weights: Option<&[f64]>,
    coeffs: &DVector<f64>,
) -> SupportVec {
    let mut raw: Vec<(usize, f64)> = Vec::new();
    for (slot, &j) in indices.iter().enumerate() {
        let c = coeffs[slot] * weights.map_or(1.0, |ws| ws[slot]);
        if c == 0.0 {
            continue;
        }
        op.for_col(j, &mut |i, v| raw.push((i, c * v)));
    }
    raw.sort_unstable_by_key(|&(i, _)| i);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
    for (i, v) in raw {
        match entries.last_mut() {
            Some((last, acc)) if *last == i => *acc += v,
            _ => entries.push((i, v)),
        }
    }
    SupportVec::Sparse {
        dim: op.nrows(),
        entries,
    }
}

/// A vector known either densely or by its sparse support.
#[derive(Debug, Clone, PartialEq)]
pub enum SupportVec {
    Dense(DVector<f64>),
    Sparse {
        dim: usize,
        /// Row-sorted, index-unique entries.
        entries: Vec<(usize, f64)>,
    },
}

impl SupportVec {
    pub fn zeros_sparse(dim: usize) -> Self {
        SupportVec::Sparse {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SupportVec::Dense(v) => v.len(),
            SupportVec::Sparse { dim, .. } => *dim,
        }
    }

    /// Number of explicitly stored entries.
    pub fn touched(&self) -> usize {
        match self {
            SupportVec::Dense(v) => v.len(),
            SupportVec::Sparse { entries, .. } => entries.len(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        match self {
            SupportVec::Dense(v) => v.norm_squared(),
            SupportVec::Sparse { entries, .. } => entries.iter().map(|&(_, v)| v * v).sum(),
        }
    }

    pub fn dot_dense(&self, other: &DVector<f64>) -> f64 {
        match self {
            SupportVec::Dense(v) => v.dot(other),
            SupportVec::Sparse { entries, .. } => {
                entries.iter().map(|&(i, v)| v * other[i]).sum()
            }
        }
    }

    /// `out += alpha * self`.
    pub fn axpy_into(&self, alpha: f64, out: &mut DVector<f64>) {
        match self {
            SupportVec::Dense(v) => out.axpy(alpha, v, 1.0),
            SupportVec::Sparse { entries, .. } => {
                for &(i, v) in entries {
                    out[i] += alpha * v;
                }
            }
        }
    }

    pub fn to_dense(&self) -> DVector<f64> {
        match self {
            SupportVec::Dense(v) => v.clone(),
            SupportVec::Sparse { dim, entries } => {
                let mut out = DVector::zeros(*dim);
                for &(i, v) in entries {
                    out[i] = v;
                }
                out
            }
        }
    }
}

/// A least-squares problem `min ||Ax - b||`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub a: Matrix,
    pub b: DVector<f64>,
}

impl ProblemInstance {
    pub fn new(a: Matrix, b: DVector<f64>) -> Result<Self, LinalgError> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(LinalgError::Empty);
        }
        if b.len() != a.nrows() {
            return Err(LinalgError::DimensionMismatch {
                op: "right-hand side",
                expected: a.nrows(),
                got: b.len(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }
}

/// A ridge problem `min ||Ax - b||^2 / 2 + lambda ||x||^2 / 2`, lambda > 0.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    pub a_bar: Matrix,
    pub b_bar: DVector<f64>,
    pub lambda: f64,
}

impl RidgeProblem {
    pub fn new(a_bar: Matrix, b_bar: DVector<f64>, lambda: f64) -> Result<Self, LinalgError> {
        if lambda <= 0.0 || lambda.is_nan() {
            return Err(LinalgError::NonPositiveLambda(lambda));
        }
        let base = ProblemInstance::new(a_bar, b_bar)?;
        Ok(Self {
            a_bar: base.a,
            b_bar: base.b,
            lambda,
        })
    }

    pub fn nrows(&self) -> usize {
        self.a_bar.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.a_bar.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy() -> Matrix {
        Matrix::from_dense(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 1.0, 1.0]))
    }

    #[test]
    fn matvec_identity() {
        let a = Matrix::from_dense(DMatrix::identity(3, 3));
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(a.matvec(&x).unwrap(), x);
    }

    #[test]
    fn matvec_hand_product() {
        let y = toy().matvec(&DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(y, DVector::from_vec(vec![1.0, 2.0, 2.0]));
    }

    #[test]
    fn matvec_zero_matrix() {
        let a = Matrix::from_dense(DMatrix::zeros(2, 2));
        let y = a.matvec(&DVector::from_vec(vec![5.0, 7.0])).unwrap();
        assert_eq!(y, DVector::zeros(2));
    }

    #[test]
    fn matvec_dimension_mismatch() {
        assert!(toy().matvec(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn rmatvec_identity_and_hand_product() {
        let a = Matrix::from_dense(DMatrix::identity(3, 3));
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(a.rmatvec(&y).unwrap(), y);

        let s = toy().rmatvec(&DVector::from_vec(vec![1.0, 1.0, 1.0])).unwrap();
        assert_eq!(s, DVector::from_vec(vec![2.0, 3.0]));
    }

    #[test]
    fn rmatvec_zero_vector_and_mismatch() {
        assert_eq!(toy().rmatvec(&DVector::zeros(3)).unwrap(), DVector::zeros(2));
        assert!(toy().rmatvec(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn sketched_dot_coordinate_pick() {
        let a = Matrix::from_dense(DMatrix::identity(3, 3));
        let s = a
            .sketched_columns_dot(&[1], None, &DVector::from_vec(vec![4.0, 5.0, 6.0]))
            .unwrap();
        assert_eq!(s, DVector::from_vec(vec![5.0]));
    }

    #[test]
    fn sketched_dot_matches_restricted_rmatvec() {
        let v = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let s = toy().sketched_columns_dot(&[0, 1], None, &v).unwrap();
        assert_eq!(s, DVector::from_vec(vec![2.0, 3.0]));
    }

    #[test]
    fn combine_columns_scales_single_column() {
        let got = toy()
            .combine_columns(&[0], None, &DVector::from_vec(vec![3.0]))
            .unwrap()
            .to_dense();
        assert_eq!(got, DVector::from_vec(vec![3.0, 0.0, 3.0]));
    }

    #[test]
    fn sketched_index_errors() {
        let v = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert!(matches!(
            toy().sketched_columns_dot(&[5], None, &v),
            Err(LinalgError::ColumnOutOfRange { .. })
        ));
        assert!(matches!(
            toy().sketched_columns_dot(&[0, 0], None, &v),
            Err(LinalgError::DuplicateIndex { .. })
        ));
    }

    #[test]
    fn sparse_and_dense_agree() {
        let dense = toy();
        let sparse = Matrix::sparse_from_dense(&dense.to_dense());
        let x = DVector::from_vec(vec![0.3, -1.7]);
        let y = DVector::from_vec(vec![0.1, 2.0, -0.4]);
        assert_relative_eq!(
            dense.matvec(&x).unwrap(),
            sparse.matvec(&x).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            dense.rmatvec(&y).unwrap(),
            sparse.rmatvec(&y).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn support_vec_ops() {
        let sv = SupportVec::Sparse {
            dim: 4,
            entries: vec![(0, 2.0), (3, -1.0)],
        };
        let dense = DVector::from_vec(vec![1.0, 1.0, 1.0, 2.0]);
        assert_eq!(sv.dot_dense(&dense), 0.0);
        assert_eq!(sv.norm_sq(), 5.0);
        let mut out = DVector::zeros(4);
        sv.axpy_into(2.0, &mut out);
        assert_eq!(out, DVector::from_vec(vec![4.0, 0.0, 0.0, -2.0]));
    }

    #[test]
    fn product_cost_model() {
        // A full product on a dense matrix costs rows * columns pairs; a
        // sketched product costs the nonzeros of the selected columns.
        let dense = toy();
        assert_eq!(dense.full_product_cost(), 6);
        let sparse = Matrix::sparse_from_dense(&dense.to_dense());
        assert_eq!(sparse.full_product_cost(), 4);
        assert_eq!(ColumnOp::col_nnz(&sparse, 0) + ColumnOp::col_nnz(&sparse, 1), 4);
    }

    #[test]
    fn ridge_problem_requires_positive_lambda() {
        let a = toy();
        let b = DVector::zeros(3);
        assert!(RidgeProblem::new(a.clone(), b.clone(), 0.0).is_err());
        assert!(RidgeProblem::new(a, b, 0.1).is_ok());
    }

    #[test]
    fn problems_and_matrices_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Matrix>();
        assert_send_sync::<ProblemInstance>();
        assert_send_sync::<RidgeProblem>();
    }
}
