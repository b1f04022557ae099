//! Drives an engine to its stopping rule, recording one trace record per
//! completed iteration. Telemetry (RSE, gradient norm, wall time) is never
//! charged to the flop counters.

use std::time::Instant;

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{ColumnOp, ProblemInstance};
use crate::sketch::SketchDistribution;
use crate::theory::gamma_sample;

use super::{
    cgls_init, cgls_step, efficient_init, efficient_rcgls_step, efficient_residual,
    efficient_solution, grcd_init, grcd_step, rcgls_advance, rcgls_init, rcgls_redirect,
    SolverError,
};
use crate::sketch::SketchSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    Cgls,
    Rcgls,
    RcglsEfficient,
    Grcd,
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Cgls => "cgls",
            MethodKind::Rcgls => "rcgls",
            MethodKind::RcglsEfficient => "rcgls-efficient",
            MethodKind::Grcd => "grcd",
        }
    }
}

/// Stopping rule; at least the iteration budget is always active.
#[derive(Debug, Clone)]
pub struct StopRule {
    pub max_iterations: usize,
    /// Stop once `||x - x*||^2 / ||x0 - x*||^2` falls to this value.
    pub rse_tolerance: Option<f64>,
    /// Stop once `||A^T r|| <= tol * ||A^T b||`.
    pub gradient_tolerance: Option<f64>,
    /// Relative floor under which a sketched gradient counts as zero.
    pub zero_threshold: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            rse_tolerance: None,
            gradient_tolerance: None,
            zero_threshold: f64::EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    RseTolerance,
    GradientTolerance,
}

/// Per-iteration telemetry.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    /// Completed iterations (1-based; the pre-iteration state is not traced).
    pub k: usize,
    /// `||x - x*||^2 / ||x0 - x*||^2`; NaN when no reference was supplied.
    pub rse: f64,
    /// `||A^T r||`.
    pub grad_norm: f64,
    /// Cumulative counted multiply-add pairs.
    pub flops: u64,
    /// Seconds since the run started; 0 when timing is disabled.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub stop: StopRule,
    /// Reference solution enabling RSE telemetry and stopping.
    pub x_star: Option<DVector<f64>>,
    /// Initial iterate; zeros when absent.
    pub x0: Option<DVector<f64>>,
    /// Collect per-step improvement-factor samples (CGLS / RCGLS only).
    pub collect_gamma: bool,
    /// Measure wall time per iteration.
    pub timing: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub x: DVector<f64>,
    pub trace: Vec<TraceRecord>,
    pub stop_reason: StopReason,
    /// Improvement-factor samples when requested (gamma_0 = 1 first).
    pub gammas: Vec<f64>,
    pub rescue_events: u64,
}

struct Recorder<'a> {
    opts: &'a RunOptions,
    rse_norm: Option<f64>,
    grad_scale: f64,
    start: Instant,
    trace: Vec<TraceRecord>,
}

impl Recorder<'_> {
    /// Appends one record; returns a stop reason when a tolerance is met.
    fn record(
        &mut self,
        k: usize,
        x: &DVector<f64>,
        grad_norm: f64,
        flops: u64,
    ) -> Option<StopReason> {
        let rse = match (&self.opts.x_star, self.rse_norm) {
            (Some(xs), Some(n0)) => (x - xs).norm_squared() / n0,
            _ => f64::NAN,
        };
        let wall = if self.opts.timing {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        self.trace.push(TraceRecord {
            k,
            rse,
            grad_norm,
            flops,
            wall_time: wall,
        });
        if let Some(tol) = self.opts.stop.rse_tolerance {
            if rse <= tol {
                return Some(StopReason::RseTolerance);
            }
        }
        if let Some(tol) = self.opts.stop.gradient_tolerance {
            if grad_norm <= tol * self.grad_scale {
                return Some(StopReason::GradientTolerance);
            }
        }
        None
    }
}

/// Runs the selected engine on a least-squares problem. Deterministic for a
/// fixed seed: every engine consumes one sketch draw at initialization and
/// one per iteration.
pub fn run_solver(
    problem: &ProblemInstance,
    method: MethodKind,
    dist: &SketchDistribution,
    opts: &RunOptions,
    rng: &mut ChaCha8Rng,
) -> Result<RunOutcome, SolverError> {
    let a = &problem.a;
    let d = a.ncols();
    if method != MethodKind::Cgls && dist.ambient_dim() != d {
        return Err(SolverError::AmbientMismatch {
            dist: dist.ambient_dim(),
            op: d,
        });
    }
    let x0 = match &opts.x0 {
        Some(x0) => {
            if x0.len() != d {
                return Err(SolverError::DimensionMismatch {
                    what: "initial iterate",
                    expected: d,
                    got: x0.len(),
                });
            }
            x0.clone()
        }
        None => DVector::zeros(d),
    };
    if opts.stop.rse_tolerance.is_some() && opts.x_star.is_none() {
        return Err(SolverError::RseNeedsReference);
    }
    let rse_norm = match &opts.x_star {
        Some(xs) => {
            if xs.len() != d {
                return Err(SolverError::DimensionMismatch {
                    what: "reference solution",
                    expected: d,
                    got: xs.len(),
                });
            }
            let n0 = (&x0 - xs).norm_squared();
            if n0 == 0.0 {
                return Err(SolverError::RseUndefined);
            }
            Some(n0)
        }
        None => None,
    };

    let grad_scale = a.rmatvec(&problem.b)?.norm();
    let zero_thr = opts.stop.zero_threshold;
    let mut recorder = Recorder {
        opts,
        rse_norm,
        grad_scale,
        start: Instant::now(),
        trace: Vec::new(),
    };
    let mut gammas = Vec::new();
    if opts.collect_gamma && matches!(method, MethodKind::Cgls | MethodKind::Rcgls) {
        gammas.push(1.0);
    }

    match method {
        MethodKind::Cgls => {
            let mut st = cgls_init(a, &problem.b, &x0)?;
            let mut reason = StopReason::MaxIterations;
            for k in 1..=opts.stop.max_iterations {
                if opts.collect_gamma {
                    let p_prev = st.p.clone();
                    cgls_step(&mut st, a);
                    let s = SketchSample::Identity { ambient: d };
                    gammas.push(gamma_sample(a, &s, &st.r, Some(&p_prev)));
                } else {
                    cgls_step(&mut st, a);
                }
                let grad_norm = a.apply_transpose(&st.r).norm();
                if let Some(r) = recorder.record(k, &st.x, grad_norm, st.flops.total()) {
                    reason = r;
                    break;
                }
            }
            Ok(RunOutcome {
                x: st.x,
                trace: recorder.trace,
                stop_reason: reason,
                gammas,
                rescue_events: 0,
            })
        }
        MethodKind::Rcgls => {
            let s0 = dist.draw(rng);
            let mut st = rcgls_init(a, &problem.b, &x0, &s0)?;
            let mut reason = StopReason::MaxIterations;
            for k in 1..=opts.stop.max_iterations {
                rcgls_advance(&mut st, zero_thr);
                let s = dist.draw(rng);
                if opts.collect_gamma {
                    // The improvement factor pairs the incoming sketch with
                    // the direction it corrects against.
                    gammas.push(gamma_sample(a, &s, &st.r, Some(&st.p)));
                }
                rcgls_redirect(&mut st, a, &s);
                let grad_norm = a.apply_transpose(&st.r).norm();
                if let Some(r) = recorder.record(k, &st.x, grad_norm, st.flops.total()) {
                    reason = r;
                    break;
                }
            }
            Ok(RunOutcome {
                x: st.x,
                trace: recorder.trace,
                stop_reason: reason,
                gammas,
                rescue_events: 0,
            })
        }
        MethodKind::RcglsEfficient => {
            let s0 = dist.draw(rng);
            let mut st = efficient_init(a, &problem.b, &x0, &s0)?;
            let mut reason = StopReason::MaxIterations;
            for k in 1..=opts.stop.max_iterations {
                let s = dist.draw(rng);
                efficient_rcgls_step(&mut st, a, &s, zero_thr);
                let x = efficient_solution(&st);
                let r = efficient_residual(&st, &problem.b);
                let grad_norm = a.apply_transpose(&r).norm();
                if let Some(rr) = recorder.record(k, &x, grad_norm, st.flops.total()) {
                    reason = rr;
                    break;
                }
            }
            Ok(RunOutcome {
                x: efficient_solution(&st),
                trace: recorder.trace,
                stop_reason: reason,
                gammas,
                rescue_events: st.rescue_events,
            })
        }
        MethodKind::Grcd => {
            let mut st = grcd_init(a, &problem.b, &x0)?;
            let mut reason = StopReason::MaxIterations;
            for k in 1..=opts.stop.max_iterations {
                let s = dist.draw(rng);
                grcd_step(&mut st, a, &s, zero_thr);
                let grad_norm = a.apply_transpose(&st.r).norm();
                if let Some(r) = recorder.record(k, &st.x, grad_norm, st.flops.total()) {
                    reason = r;
                    break;
                }
            }
            Ok(RunOutcome {
                x: st.x,
                trace: recorder.trace,
                stop_reason: reason,
                gammas,
                rescue_events: 0,
            })
        }
    }
}
