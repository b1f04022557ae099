//! Drives the ridge engines with the same trace and stopping machinery as
//! the least-squares runner. The accelerated engine, the efficient
//! reformulation, and the coordinate-descent baseline all share the option
//! selection rule, so every method attacks the same subproblem.

use std::time::Instant;

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{ColumnOp, RidgeProblem};
use crate::sketch::DistKind;
use crate::solvers::{
    efficient_init, efficient_rcgls_step, efficient_residual, efficient_solution, RunOptions,
    RunOutcome, SolverError, StopReason, TraceRecord,
};

use super::{
    build_augmented, ridge_grcd1_init, ridge_grcd1_step, ridge_grcd2_init, ridge_grcd2_step,
    ridge_option1_init, ridge_option1_step, ridge_option2_init, ridge_option2_step, select_option,
    AccessPattern, OptionChoice, ResolvedOption,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RidgeMethod {
    Rcgls,
    RcglsEfficient,
    Grcd,
}

impl RidgeMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RidgeMethod::Rcgls => "ridge-rcgls",
            RidgeMethod::RcglsEfficient => "ridge-rcgls-efficient",
            RidgeMethod::Grcd => "ridge-grcd",
        }
    }
}

struct Telemetry<'a> {
    opts: &'a RunOptions,
    rse_norm: Option<f64>,
    grad_scale: f64,
    start: Instant,
    trace: Vec<TraceRecord>,
}

impl<'a> Telemetry<'a> {
    fn new(opts: &'a RunOptions, x0: &DVector<f64>, grad_scale: f64) -> Result<Self, SolverError> {
        if opts.stop.rse_tolerance.is_some() && opts.x_star.is_none() {
            return Err(SolverError::RseNeedsReference);
        }
        let rse_norm = match &opts.x_star {
            Some(xs) => {
                let n0 = (x0 - xs).norm_squared();
                if n0 == 0.0 {
                    return Err(SolverError::RseUndefined);
                }
                Some(n0)
            }
            None => None,
        };
        Ok(Self {
            opts,
            rse_norm,
            grad_scale,
            start: Instant::now(),
            trace: Vec::new(),
        })
    }

    /// Records one iteration; returns a stop reason when a tolerance is met.
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

/// Runs one ridge method. `Auto` resolves the option from the problem shape
/// with both access kinds available; sketches are built in the resolved
/// option's ambient dimension. All runs start from zero (Option II's
/// auxiliary variable starts at zero, which already gives `x0 = 0`).
pub fn run_ridge(
    problem: &RidgeProblem,
    method: RidgeMethod,
    option: OptionChoice,
    dist_kind: DistKind,
    q: usize,
    opts: &RunOptions,
    rng: &mut ChaCha8Rng,
) -> Result<RunOutcome, SolverError> {
    if let Some(x0) = &opts.x0 {
        if x0.iter().any(|&z| z != 0.0) {
            return Err(SolverError::DimensionMismatch {
                what: "ridge runs start from zero; nonzero initial iterate",
                expected: 0,
                got: x0.len(),
            });
        }
    }
    let resolved = match option {
        OptionChoice::Auto => select_option(problem.nrows(), problem.ncols(), AccessPattern::Both),
        OptionChoice::OptionI => ResolvedOption::OptionI,
        OptionChoice::OptionII => ResolvedOption::OptionII,
    };
    match resolved {
        ResolvedOption::OptionI => run_option1(problem, method, dist_kind, q, opts, rng),
        ResolvedOption::OptionII => run_option2(problem, method, dist_kind, q, opts, rng),
    }
}

fn run_option1(
    problem: &RidgeProblem,
    method: RidgeMethod,
    dist_kind: DistKind,
    q: usize,
    opts: &RunOptions,
    rng: &mut ChaCha8Rng,
) -> Result<RunOutcome, SolverError> {
    let aug = build_augmented(problem).map_err(SolverError::from)?;
    let v = aug.v_block();
    let dist = dist_kind.build(&v, q)?;
    let a = &problem.a_bar;
    let lambda = problem.lambda;
    let x0 = DVector::zeros(problem.ncols());
    let grad_scale = ColumnOp::apply_transpose(a, &problem.b_bar).norm();
    let mut tel = Telemetry::new(opts, &x0, grad_scale)?;
    let zero_thr = opts.stop.zero_threshold;

    match method {
        RidgeMethod::Rcgls => {
            let s0 = dist.draw(rng);
            let mut st = ridge_option1_init(problem, &x0, &s0)?;
            let mut reason = StopReason::MaxIterations;
            for k in 1..=opts.stop.max_iterations {
                let s = dist.draw(rng);
                ridge_option1_step(&mut st, problem, &s, zero_thr);
                let grad =
                    ColumnOp::apply_transpose(a, &st.g) - &st.x * lambda;
                if let Some(r) = tel.record(k, &st.x, grad.norm(), st.flops.total()) {
                    reason = r;
                    break;
                }
            }
            Ok(RunOutcome {
                x: st.x,
                trace: tel.trace,
                stop_reason: reason,
                gammas: Vec::new(),
                rescue_events: st.rescue_events,
            })
        }
        RidgeMethod::Grcd => {
            let mut st = ridge_grcd1_init(problem, &x0)?;
            let mut reason = StopReason::MaxIterations;
            for k in 1..=opts.stop.max_iterations {
                let s = dist.draw(rng);
                ridge_grcd1_step(&mut st, problem, &s, zero_thr);
                let grad =
                    ColumnOp::apply_transpose(a, &st.g) - &st.x * lambda;
                if let Some(r) = tel.record(k, &st.x, grad.norm(), st.flops.total()) {
                    reason = r;
                    break;
                }
            }
            Ok(RunOutcome {
                x: st.x,
                trace: tel.trace,
                stop_reason: reason,
                gammas: Vec::new(),
                rescue_events: 0,
            })
        }
        RidgeMethod::RcglsEfficient => {
            let b_hat = aug.b_hat();
            let s0 = dist.draw(rng);
            let mut st = efficient_init(&v, &b_hat, &x0, &s0)?;
            let mut reason = StopReason::MaxIterations;
            for k in 1..=opts.stop.max_iterations {
                let s = dist.draw(rng);
                efficient_rcgls_step(&mut st, &v, &s, zero_thr);
                let x = efficient_solution(&st);
                let r_hat = efficient_residual(&st, &b_hat);
                let grad_norm = v.apply_transpose(&r_hat).norm();
                if let Some(r) = tel.record(k, &x, grad_norm, st.flops.total()) {
                    reason = r;
                    break;
                }
            }
            Ok(RunOutcome {
                x: efficient_solution(&st),
                trace: tel.trace,
                stop_reason: reason,
                gammas: Vec::new(),
                rescue_events: st.rescue_events,
            })
        }
    }
}

fn run_option2(
    problem: &RidgeProblem,
    method: RidgeMethod,
    dist_kind: DistKind,
    q: usize,
    opts: &RunOptions,
    rng: &mut ChaCha8Rng,
) -> Result<RunOutcome, SolverError> {
    let aug = build_augmented(problem).map_err(SolverError::from)?;
    let u = aug.u_block();
    let dist = dist_kind.build(&u, q)?;
    let at = aug.a_transpose();
    let lambda = problem.lambda;
    let sqrt_l = lambda.sqrt();
    let y0 = DVector::zeros(problem.nrows());
    let x0 = DVector::zeros(problem.ncols());
    let grad_scale = sqrt_l * problem.b_bar.norm();
    let mut tel = Telemetry::new(opts, &x0, grad_scale)?;
    let zero_thr = opts.stop.zero_threshold;

    // Full gradient of the auxiliary subproblem at (x, y).
    let subgrad = |x: &DVector<f64>, y: &DVector<f64>| -> f64 {
        let gap = &problem.b_bar - ColumnOp::apply_transpose(at, x);
        (gap * sqrt_l - y * lambda).norm()
    };

    match method {
        RidgeMethod::Rcgls => {
            let s0 = dist.draw(rng);
            let mut st = ridge_option2_init(problem, at, &y0, &s0)?;
            let mut reason = StopReason::MaxIterations;
            for k in 1..=opts.stop.max_iterations {
                let s = dist.draw(rng);
                ridge_option2_step(&mut st, problem, at, &s, zero_thr);
                let grad_norm = subgrad(&st.x, &st.y);
                if let Some(r) = tel.record(k, &st.x, grad_norm, st.flops.total()) {
                    reason = r;
                    break;
                }
            }
            Ok(RunOutcome {
                x: st.x,
                trace: tel.trace,
                stop_reason: reason,
                gammas: Vec::new(),
                rescue_events: st.rescue_events,
            })
        }
        RidgeMethod::Grcd => {
            let mut st = ridge_grcd2_init(problem, at, &y0)?;
            let mut reason = StopReason::MaxIterations;
            for k in 1..=opts.stop.max_iterations {
                let s = dist.draw(rng);
                ridge_grcd2_step(&mut st, problem, at, &s, zero_thr);
                let grad_norm = subgrad(&st.x, &st.y);
                if let Some(r) = tel.record(k, &st.x, grad_norm, st.flops.total()) {
                    reason = r;
                    break;
                }
            }
            Ok(RunOutcome {
                x: st.x,
                trace: tel.trace,
                stop_reason: reason,
                gammas: Vec::new(),
                rescue_events: 0,
            })
        }
        RidgeMethod::RcglsEfficient => {
            let b_hat = aug.b_hat();
            let s0 = dist.draw(rng);
            let mut st = efficient_init(&u, &b_hat, &y0, &s0)?;
            let mut reason = StopReason::MaxIterations;
            for k in 1..=opts.stop.max_iterations {
                let s = dist.draw(rng);
                efficient_rcgls_step(&mut st, &u, &s, zero_thr);
                let y = efficient_solution(&st);
                let x = ColumnOp::apply(at, &y) / sqrt_l;
                let r_hat = efficient_residual(&st, &b_hat);
                let grad_norm = u.apply_transpose(&r_hat).norm();
                if let Some(r) = tel.record(k, &x, grad_norm, st.flops.total()) {
                    reason = r;
                    break;
                }
            }
            let y = efficient_solution(&st);
            Ok(RunOutcome {
                x: ColumnOp::apply(at, &y) / sqrt_l,
                trace: tel.trace,
                stop_reason: reason,
                gammas: Vec::new(),
                rescue_events: st.rescue_events,
            })
        }
    }
}
