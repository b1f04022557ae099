//! Randomized conjugate-gradient least-squares (RCGLS) solvers.
//!
//! The crate provides:
//!
//! - [`linalg`]: dense and compressed-sparse-column matrices, LIBSVM
//!   ingestion, and direct least-squares / ridge oracles used as ground
//!   truth by tests and benchmarks.
//! - [`sketch`]: the distribution of sketching matrices `S` (weighted
//!   single coordinate, uniform index blocks, fixed identity, Gaussian),
//!   applied in structured form without materializing `S`.
//! - [`solvers`]: the iteration engines (classical CGLS, RCGLS, the
//!   sparse-efficient RCGLS reformulation, and the GRCD baseline), a
//!   uniform tracing runner, and a by-name strategy registry.
//! - [`ridge`]: ridge regression through the block-orthogonal augmented
//!   reformulation, with column-access (Option I) and row-access
//!   (Option II) variants plus a coordinate-descent baseline.
//! - [`theory`]: contraction factors, per-step improvement samples, and a
//!   Monte-Carlo check of the expected-decrease inequality.

pub mod flops;
pub mod linalg;
pub mod ridge;
pub mod sketch;
pub mod solvers;
pub mod testing;
pub mod theory;
