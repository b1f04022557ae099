//! Flop accounting shared by every engine.
//!
//! Counts are multiply-add pairs and are split into three buckets so the
//! full-dimensional work avoided by the efficient reformulation is
//! measurable:
//!
//! - *sketched work*: products and updates that touch only matrix entries
//!   in sketched columns or the sketch's support (counted at the number of
//!   touched entries);
//! - *full-dimensional work*: axpy updates and reductions over entire
//!   length-`n` or length-`d` vectors, and full matrix-vector products
//!   (counted at the vector length, or `nnz` / `n*d` for products);
//! - *scalar updates*: the O(1) recurrences for stepsizes and conjugacy
//!   coefficients; reductions over a sketch-sized support fold into the
//!   scalar they produce and count 1.
//!
//! Telemetry (error norms, gradient norms for stopping, iterate
//! reconstruction for traces) is never counted. Likewise, the efficient
//! engine's occasional re-representation work (gauge rebases, tracked-norm
//! rescues, reset folds) changes no iterate and sits outside these
//! categories; it is tallied through event counters on the state and shows
//! up in wall time, not in the flop column.

/// Cumulative multiply-add counter carried by solver state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlopCounter {
    total: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Work restricted to sketched columns or the sketch support.
    #[inline]
    pub fn sketched(&mut self, touched: usize) {
        self.total += touched as u64;
    }

    /// A full-dimensional vector operation or full matrix-vector product.
    #[inline]
    pub fn full_dim(&mut self, len: usize) {
        self.total += len as u64;
    }

    /// O(1) scalar parameter updates.
    #[inline]
    pub fn scalars(&mut self, count: usize) {
        self.total += count as u64;
    }

    #[inline]
    pub fn total(&self) -> u64 {
        self.total
    }
}
