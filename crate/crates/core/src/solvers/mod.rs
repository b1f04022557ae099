//! Iteration engines and the uniform runner.
//!
//! Engines are plain state machines over a [`ColumnOp`](crate::linalg::ColumnOp);
//! [`run_solver`] drives them with per-iteration telemetry, and
//! [`registry`] exposes every method (including the ridge variants) behind
//! a by-name strategy trait for runtime selection.

mod cgls;
mod common;
mod efficient;
mod grcd;
mod rcgls;
pub mod registry;
mod runner;

pub use cgls::{cgls_init, cgls_step};
pub use efficient::{
    efficient_init, efficient_rcgls_step, efficient_residual, efficient_solution, EfficientState,
};
pub use grcd::{grcd_init, grcd_step, GrcdState};
pub use rcgls::{rcgls_advance, rcgls_init, rcgls_redirect, rcgls_step, RcglsState};
pub use runner::{run_solver, MethodKind, RunOptions, RunOutcome, StopReason, StopRule, TraceRecord};

pub(crate) use common::{restrict, sketch_image, transpose_sketch};

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::sketch::SketchError;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("sketch sample does not fit the operator's column dimension")]
    SampleMismatch,
    #[error("sketch distribution lives in dimension {dist}, operator columns are {op}")]
    AmbientMismatch { dist: usize, op: usize },
    #[error("solvers reject an all-zero operator")]
    ZeroOperator,
    #[error("RSE stopping requires a reference solution")]
    RseNeedsReference,
    #[error("RSE is undefined: the initial iterate already equals the reference solution")]
    RseUndefined,
    #[error("method `{0}` does not apply to this problem family")]
    WrongFamily(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
}
