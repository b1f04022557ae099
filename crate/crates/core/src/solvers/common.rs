//! Sketched products shared by the iteration engines.
//!
//! For structured samples these touch only the nonzeros of the sketched
//! columns; the identity and dense Gaussian kinds fall back to full
//! products and are counted as full-dimensional work.

use nalgebra::DVector;

use crate::flops::FlopCounter;
use crate::linalg::{combine_columns, ColumnOp, SupportVec};
use crate::sketch::SketchSample;

/// `t = S^T (A^T v)`.
pub(crate) fn transpose_sketch<O: ColumnOp + ?Sized>(
    op: &O,
    s: &SketchSample,
    v: &DVector<f64>,
    flops: &mut FlopCounter,
) -> DVector<f64> {
    match s {
        SketchSample::ScaledCoordinate { index, scale } => {
            flops.sketched(op.col_nnz(*index) + 1);
            DVector::from_vec(vec![scale * op.col_dot(*index, v)])
        }
        SketchSample::IndexBlock { indices } => {
            let mut t = DVector::zeros(indices.len());
            let mut touched = 0;
            for (slot, &j) in indices.iter().enumerate() {
                touched += op.col_nnz(j);
                t[slot] = op.col_dot(j, v);
            }
            flops.sketched(touched);
            t
        }
        SketchSample::Identity { .. } => {
            flops.full_dim(op.full_product_cost());
            op.apply_transpose(v)
        }
        SketchSample::Dense(b) => {
            flops.full_dim(op.full_product_cost());
            flops.full_dim(b.nrows() * b.ncols());
            b.transpose() * op.apply_transpose(v)
        }
    }
}

/// `g = S t` (in the operator's column space) and `ag = A S t`.
pub(crate) fn sketch_image<O: ColumnOp + ?Sized>(
    op: &O,
    s: &SketchSample,
    t: &DVector<f64>,
    flops: &mut FlopCounter,
) -> (SupportVec, SupportVec) {
    match s {
        SketchSample::ScaledCoordinate { index, scale } => {
            flops.sketched(1 + op.col_nnz(*index));
            let g = SupportVec::Sparse {
                dim: op.ncols(),
                entries: vec![(*index, scale * t[0])],
            };
            let ag = combine_columns(op, &[*index], Some(&[*scale]), t);
            (g, ag)
        }
        SketchSample::IndexBlock { indices } => {
            let mut touched = 0;
            for &j in indices {
                touched += op.col_nnz(j);
            }
            flops.sketched(touched);
            let g = SupportVec::Sparse {
                dim: op.ncols(),
                entries: indices.iter().enumerate().map(|(k, &j)| (j, t[k])).collect(),
            };
            let ag = combine_columns(op, indices, None, t);
            (g, ag)
        }
        SketchSample::Identity { .. } => {
            flops.full_dim(op.full_product_cost());
            (SupportVec::Dense(t.clone()), SupportVec::Dense(op.apply(t)))
        }
        SketchSample::Dense(b) => {
            flops.full_dim(b.nrows() * b.ncols());
            let g = b * t;
            flops.full_dim(op.full_product_cost());
            let ag = op.apply(&g);
            (SupportVec::Dense(g), SupportVec::Dense(ag))
        }
    }
}

/// `S^T v` without touching the operator (used against cached vectors).
pub(crate) fn restrict(
    s: &SketchSample,
    v: &DVector<f64>,
    flops: &mut FlopCounter,
) -> DVector<f64> {
    match s {
        SketchSample::ScaledCoordinate { index, scale } => {
            flops.sketched(1);
            DVector::from_vec(vec![scale * v[*index]])
        }
        SketchSample::IndexBlock { indices } => {
            DVector::from_iterator(indices.len(), indices.iter().map(|&i| v[i]))
        }
        SketchSample::Identity { .. } => v.clone(),
        SketchSample::Dense(b) => {
            flops.full_dim(b.nrows() * b.ncols());
            b.transpose() * v
        }
    }
}

/// Ambient dimension check for a sample against the operator's column count.
pub(crate) fn sample_fits<O: ColumnOp + ?Sized>(s: &SketchSample, op: &O) -> bool {
    match s {
        SketchSample::ScaledCoordinate { index, .. } => *index < op.ncols(),
        SketchSample::IndexBlock { indices } => indices.iter().all(|&j| j < op.ncols()),
        SketchSample::Identity { ambient } => *ambient == op.ncols(),
        SketchSample::Dense(b) => b.nrows() == op.ncols(),
    }
}

pub(crate) fn operator_is_zero<O: ColumnOp + ?Sized>(op: &O) -> bool {
    (0..op.ncols()).all(|j| op.col_norm_sq(j) == 0.0)
}
