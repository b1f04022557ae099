//! By-name method registry.
//!
//! Every solver variant sits behind [`SolverStrategy`]; callers resolve a
//! name at runtime (`strategy("rcgls-efficient")`) and run it against a
//! [`Task`]. Strategies reject tasks from the wrong problem family instead
//! of guessing.

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{ProblemInstance, RidgeProblem};
use crate::ridge::{run_ridge, OptionChoice, RidgeMethod};
use crate::sketch::DistKind;

use super::runner::{run_solver, MethodKind, RunOptions, RunOutcome};
use super::SolverError;

/// A problem handed to a strategy.
pub enum Task<'a> {
    LeastSquares(&'a ProblemInstance),
    Ridge(&'a RidgeProblem),
}

impl Task<'_> {
    pub fn nrows(&self) -> usize {
        match self {
            Task::LeastSquares(p) => p.nrows(),
            Task::Ridge(p) => p.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Task::LeastSquares(p) => p.ncols(),
            Task::Ridge(p) => p.ncols(),
        }
    }
}

/// Everything a strategy needs besides the problem itself.
#[derive(Debug, Clone)]
pub struct MethodContext {
    pub dist: DistKind,
    pub q: usize,
    pub option: OptionChoice,
    pub run: RunOptions,
}

impl Default for MethodContext {
    fn default() -> Self {
        Self {
            dist: DistKind::UniformBlock,
            q: 8,
            option: OptionChoice::Auto,
            run: RunOptions::default(),
        }
    }
}

/// One interchangeable solver variant, selected by name at runtime.
pub trait SolverStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    /// Whether the strategy accepts this task's problem family.
    fn supports(&self, task: &Task) -> bool;
    fn run(
        &self,
        task: &Task,
        ctx: &MethodContext,
        rng: &mut ChaCha8Rng,
    ) -> Result<RunOutcome, SolverError>;

    /// Block size used for epoch accounting under this strategy.
    fn effective_q(&self, task: &Task, ctx: &MethodContext) -> usize {
        let ambient = sketch_ambient(task, ctx);
        match self.name() {
            "cgls" => task.nrows().min(task.ncols()),
            _ => ctx.dist.effective_q(ctx.q, ambient),
        }
    }
}

fn sketch_ambient(task: &Task, ctx: &MethodContext) -> usize {
    match task {
        Task::LeastSquares(p) => p.ncols(),
        Task::Ridge(p) => {
            use crate::ridge::{select_option, AccessPattern, ResolvedOption};
            let resolved = match ctx.option {
                OptionChoice::Auto => select_option(p.nrows(), p.ncols(), AccessPattern::Both),
                OptionChoice::OptionI => ResolvedOption::OptionI,
                OptionChoice::OptionII => ResolvedOption::OptionII,
            };
            match resolved {
                ResolvedOption::OptionI => p.ncols(),
                ResolvedOption::OptionII => p.nrows(),
            }
        }
    }
}

struct LeastSquaresStrategy {
    kind: MethodKind,
}

impl SolverStrategy for LeastSquaresStrategy {
    fn name(&self) -> &'static str {
        self.kind.name()
    }

    fn supports(&self, task: &Task) -> bool {
        matches!(task, Task::LeastSquares(_))
    }

    fn run(
        &self,
        task: &Task,
        ctx: &MethodContext,
        rng: &mut ChaCha8Rng,
    ) -> Result<RunOutcome, SolverError> {
        let Task::LeastSquares(problem) = task else {
            return Err(SolverError::WrongFamily(self.name().into()));
        };
        let dist = ctx.dist.build(&problem.a, ctx.q)?;
        run_solver(problem, self.kind, &dist, &ctx.run, rng)
    }
}

struct RidgeStrategy {
    method: RidgeMethod,
}

impl SolverStrategy for RidgeStrategy {
    fn name(&self) -> &'static str {
        self.method.name()
    }

    fn supports(&self, task: &Task) -> bool {
        matches!(task, Task::Ridge(_))
    }

    fn run(
        &self,
        task: &Task,
        ctx: &MethodContext,
        rng: &mut ChaCha8Rng,
    ) -> Result<RunOutcome, SolverError> {
        let Task::Ridge(problem) = task else {
            return Err(SolverError::WrongFamily(self.name().into()));
        };
        run_ridge(
            problem,
            self.method,
            ctx.option,
            ctx.dist,
            ctx.q,
            &ctx.run,
            rng,
        )
    }
}

/// All registered strategies, in a fixed order.
pub fn strategies() -> Vec<Box<dyn SolverStrategy>> {
    vec![
        Box::new(LeastSquaresStrategy {
            kind: MethodKind::Cgls,
        }),
        Box::new(LeastSquaresStrategy {
            kind: MethodKind::Rcgls,
        }),
        Box::new(LeastSquaresStrategy {
            kind: MethodKind::RcglsEfficient,
        }),
        Box::new(LeastSquaresStrategy {
            kind: MethodKind::Grcd,
        }),
        Box::new(RidgeStrategy {
            method: RidgeMethod::Rcgls,
        }),
        Box::new(RidgeStrategy {
            method: RidgeMethod::RcglsEfficient,
        }),
        Box::new(RidgeStrategy {
            method: RidgeMethod::Grcd,
        }),
    ]
}

/// Resolves a strategy by its registered name.
pub fn strategy(name: &str) -> Result<Box<dyn SolverStrategy>, SolverError> {
    strategies()
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| SolverError::UnknownMethod(name.into()))
}

pub fn strategy_names() -> Vec<&'static str> {
    strategies().iter().map(|s| s.name()).collect()
}

/// Zero vector sized for the task's primal variable.
pub fn zero_start(task: &Task) -> DVector<f64> {
    DVector::zeros(task.ncols())
}
