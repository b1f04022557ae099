//! Multi-trial experiment orchestration.
//!
//! Each trial seeds its own stream from `(seed, trial)`, builds one problem
//! shared by every method in the trial, and runs the methods in config
//! order with independent `(seed, trial, method)` streams. Records are
//! buffered per trial and merged in order, so identical configurations give
//! identical output regardless of trial parallelism.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rcgls::linalg::{direct_oracle, read_libsvm, Matrix, ProblemInstance, RidgeProblem};
use rcgls::ridge::{build_augmented, OptionChoice};
use rcgls::sketch::DistKind;
use rcgls::solvers::registry::{strategy, MethodContext, Task};
use rcgls::solvers::{
    cgls_init, cgls_step, RunOptions, StopRule,
};

use crate::synth::{generate_synthetic, SyntheticSpec};

/// Problems above this dense-entry budget use the iterative high-precision
/// reference instead of the dense oracle.
const DENSE_ORACLE_BUDGET: usize = 4_000_000;

#[derive(Debug, Clone)]
pub enum ProblemSource {
    Synthetic(SyntheticSpec),
    Libsvm(PathBuf),
}

#[derive(Debug, Clone)]
pub struct StopSpec {
    pub max_iters: usize,
    pub tol_rse: Option<f64>,
    pub tol_grad: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: ProblemSource,
    /// Registry names, run in this order within each trial.
    pub methods: Vec<String>,
    pub dist: DistKind,
    pub q: usize,
    /// Routes the experiment to the ridge solvers when present.
    pub lambda: Option<f64>,
    pub option: OptionChoice,
    pub stop: StopSpec,
    pub trials: usize,
    pub seed: u64,
    /// Measure wall time (off gives bit-reproducible output files).
    pub timing: bool,
}

/// One row of the raw benchmark table.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub trial: usize,
    pub method: String,
    pub k: usize,
    /// `k * q / m` with `m = min(n, d)`.
    pub epoch: f64,
    pub rse: f64,
    pub flops: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    /// Trials where the dense oracle was replaced by the high-precision
    /// iterative reference.
    pub oracle_fallbacks: usize,
}

/// Relative solution error `||x - x*||^2 / ||x0 - x*||^2`.
pub fn compute_rse(x: &DVector<f64>, x0: &DVector<f64>, x_star: &DVector<f64>) -> Result<f64> {
    let denom = (x0 - x_star).norm_squared();
    if denom == 0.0 {
        bail!("RSE undefined: the initial iterate equals the reference solution");
    }
    Ok((x - x_star).norm_squared() / denom)
}

fn mix_seed(seed: u64, trial: u64, lane: u64) -> u64 {
    // splitmix-style diffusion over (seed, trial, lane)
    let mut z = seed
        .wrapping_add(trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(lane.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// High-precision iterative reference for problems too large for the dense
/// oracle: a long CGLS run on the (possibly regularized) operator, driven to
/// a 1e-14 relative gradient.
fn iterative_reference(a: &Matrix, b: &DVector<f64>, lambda: Option<f64>) -> Result<DVector<f64>> {
    let run = |op: &dyn rcgls::linalg::ColumnOp,
               rhs: &DVector<f64>|
     -> Result<DVector<f64>> {
        let x0 = DVector::zeros(op.ncols());
        let mut st = cgls_init(op, rhs, &x0)?;
        let scale = op.apply_transpose(rhs).norm();
        for _ in 0..100 * op.ncols() {
            cgls_step(&mut st, op);
            if op.apply_transpose(&st.r).norm() <= 1e-14 * scale {
                break;
            }
        }
        Ok(st.x)
    };
    match lambda {
        None => run(a, b),
        Some(l) => {
            let problem = RidgeProblem::new(a.clone(), b.clone(), l)?;
            let aug = build_augmented(&problem)?;
            let v = aug.v_block();
            let b_hat = aug.b_hat();
            run(&v, &b_hat)
        }
    }
}

fn reference_solution(
    a: &Matrix,
    b: &DVector<f64>,
    lambda: Option<f64>,
) -> Result<(DVector<f64>, bool)> {
    if a.nrows() * a.ncols() <= DENSE_ORACLE_BUDGET {
        let cert = direct_oracle(a, b, lambda.unwrap_or(0.0))?;
        Ok((cert.x_star, false))
    } else {
        Ok((iterative_reference(a, b, lambda)?, true))
    }
}

fn trial_problem(
    config: &ExperimentConfig,
    shared: &Option<(Matrix, DVector<f64>)>,
    trial: usize,
) -> Result<(Matrix, DVector<f64>)> {
    match (&config.source, shared) {
        (ProblemSource::Synthetic(spec), _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, trial as u64, 0));
            let data = generate_synthetic(spec, &mut rng)?;
            Ok((data.a, data.b))
        }
        (ProblemSource::Libsvm(_), Some((a, b))) => Ok((a.clone(), b.clone())),
        (ProblemSource::Libsvm(path), None) => {
            let p = read_libsvm(path).with_context(|| format!("reading {}", path.display()))?;
            Ok((p.a, p.b))
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    if config.trials == 0 {
        bail!("at least one trial is required");
    }
    if config.methods.is_empty() {
        bail!("no methods requested");
    }
    // Validate method names and family consistency up front.
    for name in &config.methods {
        strategy(name).map_err(|e| anyhow!("{e}"))?;
        let is_ridge = name.starts_with("ridge-");
        if is_ridge && config.lambda.is_none() {
            bail!("method `{name}` needs --lambda");
        }
        if !is_ridge && config.lambda.is_some() {
            bail!("method `{name}` does not take --lambda; mixing families in one run is not supported");
        }
    }

    let shared = match &config.source {
        ProblemSource::Libsvm(path) => {
            let p = read_libsvm(path).with_context(|| format!("reading {}", path.display()))?;
            Some((p.a, p.b))
        }
        ProblemSource::Synthetic(_) => None,
    };

    let pool = build_pool()?;
    let trial_results: Vec<Result<(Vec<RunRecord>, bool)>> = pool.install(|| {
        use rayon::prelude::*;
        (0..config.trials)
            .into_par_iter()
            .map(|trial| run_trial(config, &shared, trial))
            .collect()
    });

    let mut records = Vec::new();
    let mut oracle_fallbacks = 0;
    for result in trial_results {
        let (mut trial_records, fallback) = result?;
        records.append(&mut trial_records);
        if fallback {
            oracle_fallbacks += 1;
        }
    }
    Ok(ExperimentOutput {
        records,
        oracle_fallbacks,
    })
}

fn build_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("RLS_SKETCH_THREADS") {
        let threads: usize = raw
            .parse()
            .map_err(|_| anyhow!("RLS_SKETCH_THREADS must be a positive integer, got `{raw}`"))?;
        builder = builder.num_threads(threads.max(1));
    }
    builder.build().context("building trial thread pool")
}

fn run_trial(
    config: &ExperimentConfig,
    shared: &Option<(Matrix, DVector<f64>)>,
    trial: usize,
) -> Result<(Vec<RunRecord>, bool)> {
    let (a, b) = trial_problem(config, shared, trial)?;
    let (x_star, fallback) = reference_solution(&a, &b, config.lambda)?;
    let m = a.nrows().min(a.ncols());

    let ls_problem;
    let ridge_problem;
    let task = match config.lambda {
        None => {
            ls_problem = ProblemInstance::new(a, b)?;
            Task::LeastSquares(&ls_problem)
        }
        Some(lambda) => {
            ridge_problem = RidgeProblem::new(a, b, lambda)?;
            Task::Ridge(&ridge_problem)
        }
    };

    let mut records = Vec::new();
    for (mi, name) in config.methods.iter().enumerate() {
        let s = strategy(name).map_err(|e| anyhow!("{e}"))?;
        let ctx = MethodContext {
            dist: config.dist,
            q: config.q,
            option: config.option,
            run: RunOptions {
                stop: StopRule {
                    max_iterations: config.stop.max_iters,
                    rse_tolerance: config.stop.tol_rse,
                    gradient_tolerance: config.stop.tol_grad,
                    zero_threshold: f64::EPSILON,
                },
                x_star: Some(x_star.clone()),
                x0: None,
                collect_gamma: false,
                timing: config.timing,
            },
        };
        let q_eff = s.effective_q(&task, &ctx);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, trial as u64, mi as u64 + 1));
        let outcome = match s.run(&task, &ctx, &mut rng) {
            Ok(out) => out,
            Err(err) => {
                // One failed method does not sink the others.
                eprintln!("trial {trial}: method `{name}` failed: {err}");
                continue;
            }
        };
        // Baseline row at k = 0: the run starts at RSE 1 with no work done.
        records.push(RunRecord {
            trial,
            method: name.clone(),
            k: 0,
            epoch: 0.0,
            rse: 1.0,
            flops: 0,
            wall_seconds: 0.0,
        });
        for t in &outcome.trace {
            records.push(RunRecord {
                trial,
                method: name.clone(),
                k: t.k,
                epoch: (t.k * q_eff) as f64 / m as f64,
                rse: t.rse,
                flops: t.flops,
                wall_seconds: t.wall_time,
            });
        }
    }
    Ok((records, fallback))
}

/// First epoch at which a (trial, method) trajectory reaches `target` RSE.
pub fn epochs_to_target(records: &[RunRecord], method: &str, trial: usize, target: f64) -> Option<f64> {
    records
        .iter()
        .filter(|r| r.method == method && r.trial == trial)
        .find(|r| r.rse <= target)
        .map(|r| r.epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(methods: &[&str]) -> ExperimentConfig {
        ExperimentConfig {
            source: ProblemSource::Synthetic(SyntheticSpec {
                cond: 50.0,
                ..SyntheticSpec::new(20, 10)
            }),
            methods: methods.iter().map(|s| s.to_string()).collect(),
            dist: DistKind::UniformBlock,
            q: 3,
            lambda: None,
            option: OptionChoice::Auto,
            stop: StopSpec {
                max_iters: 40,
                tol_rse: None,
                tol_grad: None,
            },
            trials: 2,
            seed: 7,
            timing: false,
        }
    }

    #[test]
    fn compute_rse_examples() {
        let x0 = DVector::from_vec(vec![0.0, 0.0]);
        let x_star = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(compute_rse(&x0, &x0, &x_star).unwrap(), 1.0);
        assert_eq!(compute_rse(&x_star, &x0, &x_star).unwrap(), 0.0);
        let x = DVector::from_vec(vec![3.0, 0.0]);
        assert!((compute_rse(&x, &x0, &x_star).unwrap() - 16.0 / 25.0).abs() < 1e-15);
        assert!(compute_rse(&x0, &x_star, &x_star).is_err());
    }

    #[test]
    fn zero_budget_leaves_only_baseline_records() {
        let mut config = tiny_config(&["rcgls", "grcd"]);
        config.stop.max_iters = 0;
        let out = run_experiment(&config).unwrap();
        assert_eq!(out.records.len(), 2 * 2);
        for r in &out.records {
            assert_eq!(r.k, 0);
            assert_eq!(r.rse, 1.0);
        }
    }

    #[test]
    fn epoch_accounting_follows_the_block_size() {
        let config = tiny_config(&["rcgls"]);
        let out = run_experiment(&config).unwrap();
        for r in &out.records {
            assert_eq!(r.epoch, (r.k * 3) as f64 / 10.0);
        }
    }

    #[test]
    fn identical_configs_give_identical_records() {
        let config = tiny_config(&["rcgls", "grcd"]);
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn mixed_families_are_rejected() {
        let mut config = tiny_config(&["rcgls", "ridge-rcgls"]);
        config.lambda = Some(0.05);
        assert!(run_experiment(&config).is_err());
        let mut config = tiny_config(&["ridge-rcgls"]);
        config.lambda = None;
        assert!(run_experiment(&config).is_err());
    }
}
