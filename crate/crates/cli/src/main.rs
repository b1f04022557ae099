//! Command-line harness for the randomized least-squares solvers.
//!
//! Subcommands: `solve` (least squares), `ridge` (regularized), `rates`
//! (contraction diagnostics), `bench` (multi-trial experiment with CSV and
//! SVG outputs). Method names resolve against the strategy registry, so
//! `--method` accepts any registered variant. `RLS_SKETCH_THREADS` caps
//! trial parallelism.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rcgls::linalg::read_libsvm;
use rcgls::ridge::OptionChoice;
use rcgls::sketch::{DistKind, SketchDistribution};
use rcgls::solvers::registry::strategy_names;
use rcgls::theory::{rate_report, rcd_factor};

use rcgls_cli::experiment::{
    run_experiment, ExperimentConfig, ProblemSource, RunRecord, StopSpec,
};
use rcgls_cli::output::emit_outputs;
use rcgls_cli::rates::render_rates_csv;
use rcgls_cli::synth::{generate_synthetic, SyntheticSpec};

#[derive(Parser)]
#[command(name = "rcgls-cli", about = "Randomized CGLS solvers and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run least-squares solvers on one problem.
    Solve(RunArgs),
    /// Run ridge solvers (requires --lambda).
    Ridge(RunArgs),
    /// Contraction-factor diagnostics for a (matrix, distribution) pair.
    Rates(RatesArgs),
    /// Multi-trial benchmark with CSV and SVG outputs.
    Bench(RunArgs),
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Problem source: `synthetic` or `libsvm:PATH`.
    #[arg(long, default_value = "synthetic")]
    matrix: String,
    /// Rows of the synthetic matrix.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Columns of the synthetic matrix.
    #[arg(long, default_value_t = 100)]
    d: usize,
    /// Target condition number of the synthetic matrix.
    #[arg(long, default_value_t = 1e4)]
    cond: f64,
    /// Relative noise level of the synthetic right-hand side.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

impl ProblemArgs {
    fn source(&self) -> Result<ProblemSource> {
        if self.matrix == "synthetic" {
            let mut spec = SyntheticSpec::new(self.n, self.d);
            spec.cond = self.cond;
            spec.noise_level = self.noise;
            Ok(ProblemSource::Synthetic(spec))
        } else if let Some(path) = self.matrix.strip_prefix("libsvm:") {
            Ok(ProblemSource::Libsvm(PathBuf::from(path)))
        } else {
            bail!("--matrix must be `synthetic` or `libsvm:PATH`, got `{}`", self.matrix)
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    CoordWeighted,
    UniformBlock,
    Identity,
    Gaussian,
}

impl From<DistArg> for DistKind {
    fn from(value: DistArg) -> Self {
        match value {
            DistArg::CoordWeighted => DistKind::CoordWeighted,
            DistArg::UniformBlock => DistKind::UniformBlock,
            DistArg::Identity => DistKind::Identity,
            DistArg::Gaussian => DistKind::Gaussian,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OptionArg {
    Auto,
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

impl From<OptionArg> for OptionChoice {
    fn from(value: OptionArg) -> Self {
        match value {
            OptionArg::Auto => OptionChoice::Auto,
            OptionArg::One => OptionChoice::OptionI,
            OptionArg::Two => OptionChoice::OptionII,
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Solver to run; repeat for several. Defaults per subcommand.
    #[arg(long = "method")]
    methods: Vec<String>,
    /// Sketching distribution.
    #[arg(long, value_enum, default_value_t = DistArg::UniformBlock)]
    dist: DistArg,
    /// Sketch block size.
    #[arg(long, default_value_t = 8)]
    q: usize,
    /// Ridge regularization parameter.
    #[arg(long)]
    lambda: Option<f64>,
    /// Ridge variant selection.
    #[arg(long, value_enum, default_value_t = OptionArg::Auto)]
    option: OptionArg,
    /// Stop once RSE falls to this value.
    #[arg(long)]
    tol_rse: Option<f64>,
    /// Stop once the gradient norm falls to this fraction of its start.
    #[arg(long)]
    tol_grad: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// Independent trials (default: 10 for bench, 1 otherwise).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for CSV and SVG files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip wall-clock measurement for bit-reproducible output files.
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn config(&self, ridge: bool, default_trials: usize) -> Result<ExperimentConfig> {
        if ridge && self.lambda.is_none() {
            bail!("this subcommand requires --lambda");
        }
        let methods = if self.methods.is_empty() {
            if ridge {
                vec!["ridge-rcgls".to_string(), "ridge-grcd".to_string()]
            } else {
                vec!["rcgls".to_string(), "grcd".to_string()]
            }
        } else {
            self.methods.clone()
        };
        Ok(ExperimentConfig {
            source: self.problem.source()?,
            methods,
            dist: self.dist.into(),
            q: self.q,
            lambda: if ridge { self.lambda } else { None },
            option: self.option.into(),
            stop: StopSpec {
                max_iters: self.max_iters,
                tol_rse: self.tol_rse,
                tol_grad: self.tol_grad,
            },
            trials: self.trials.unwrap_or(default_trials),
            seed: self.seed,
            timing: !self.no_timing,
        })
    }
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = DistArg::CoordWeighted)]
    dist: DistArg,
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Trajectory length for the sampled diagnostics.
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve(args) => run(args, false),
        Command::Ridge(args) => run(args, true),
        Command::Bench(args) => bench(args),
        Command::Rates(args) => rates(args),
    }
}

fn run(args: RunArgs, ridge: bool) -> Result<()> {
    let config = args.config(ridge, 1)?;
    let output = run_experiment(&config)?;
    print_summary(&config, &output.records);
    if output.oracle_fallbacks > 0 {
        eprintln!(
            "note: {} trial(s) used the high-precision iterative reference instead of the dense oracle",
            output.oracle_fallbacks
        );
    }
    if let Some(dir) = &args.out {
        let files = emit_outputs(&output.records, dir)?;
        for f in files {
            println!("wrote {}", f.display());
        }
    }
    Ok(())
}

fn bench(args: RunArgs) -> Result<()> {
    let out_dir = args
        .out
        .clone()
        .ok_or_else(|| anyhow!("bench requires --out DIR"))?;
    let ridge = args.lambda.is_some();
    let config = args.config(ridge, 10)?;
    let output = run_experiment(&config)?;
    print_summary(&config, &output.records);
    let files = emit_outputs(&output.records, &out_dir)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn rates(args: RatesArgs) -> Result<()> {
    let (a, b) = match args.problem.source()? {
        ProblemSource::Synthetic(spec) => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let data = generate_synthetic(&spec, &mut rng)?;
            (data.a, data.b)
        }
        ProblemSource::Libsvm(path) => {
            let p = read_libsvm(&path)?;
            (p.a, p.b)
        }
    };
    let kind: DistKind = args.dist.into();
    let dist = match kind {
        DistKind::CoordWeighted => SketchDistribution::coordinate_weighted(&a)?,
        DistKind::UniformBlock => SketchDistribution::uniform_block(a.ncols(), args.q)?,
        DistKind::Identity => SketchDistribution::identity(a.ncols()),
        DistKind::Gaussian => SketchDistribution::gaussian(a.ncols(), args.q)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(1));
    let report = rate_report(&a, &b, &dist, args.steps, &mut rng)?;
    let csv = render_rates_csv(&report, rcd_factor(&a)?);
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn print_summary(config: &ExperimentConfig, records: &[RunRecord]) {
    println!(
        "methods: {} | dist: {} q={} | trials: {} | registered: {}",
        config.methods.join(", "),
        config.dist.name(),
        config.q,
        config.trials,
        strategy_names().join(", ")
    );
    for method in &config.methods {
        let finals: Vec<&RunRecord> = (0..config.trials)
            .filter_map(|t| {
                records
                    .iter()
                    .rev()
                    .find(|r| r.method == *method && r.trial == t)
            })
            .collect();
        if finals.is_empty() {
            println!("  {method}: no completed runs");
            continue;
        }
        let mut rses: Vec<f64> = finals.iter().map(|r| r.rse).collect();
        rses.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = rses[rses.len() / 2];
        let max_k = finals.iter().map(|r| r.k).max().unwrap_or(0);
        let flops = finals.iter().map(|r| r.flops).max().unwrap_or(0);
        println!(
            "  {method}: median final RSE {median:.3e} | iterations up to {max_k} | flops up to {flops}"
        );
    }
}
