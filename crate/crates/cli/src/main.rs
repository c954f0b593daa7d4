//! `corsrbf` command-line front end.

mod config;
mod csvio;
mod external;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corsrbf::engine::{run_with_progress, EngineError};
use corsrbf::surrogate::{DEFAULT_BEST_FRACTION, DEFAULT_CLOUD_SIZE};
use corsrbf::{
    compute_space_scaling, refit_with_scaling, spread, BoundedDomain, LatinHypercube,
    NamedObjective, Objective, RbfModel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ObjectiveSpec, Overrides};
use crate::external::ExternalObjective;

#[derive(Parser)]
#[command(name = "corsrbf", version, about = "Surrogate-based optimization of expensive black-box functions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an optimization described by a JSON config.
    Run(RunArgs),
    /// Generate a Latin hypercube design in the unit cube.
    Lhs(LhsArgs),
    /// Refit the response surface from a history file and dump it on a grid.
    Surface(SurfaceArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// History CSV destination (standard output when neither this nor the
    /// config names one).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Built-in objective to use instead of the configured one.
    #[arg(long, value_parser = ["multimodal", "valley", "sphere"])]
    objective: Option<String>,
}

#[derive(Args)]
struct LhsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = corsrbf::latin_hypercube::DEFAULT_ATTEMPTS)]
    attempts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SurfaceArgs {
    #[arg(long)]
    history: PathBuf,
    #[arg(long, default_value_t = 101)]
    resolution: usize,
    /// Fit with the covariance-based kernel metric (default).
    #[arg(long, conflicts_with = "unscaled")]
    scaled: bool,
    /// Fit with the plain Euclidean kernel.
    #[arg(long)]
    unscaled: bool,
    /// Run config supplying the bounds the history coordinates are in.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the cloud behind the scaled fit.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Objective(String),
    Other(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (code, kind, msg) = match self {
            Failure::Config(m) => (2, "config error", m),
            Failure::Objective(m) => (3, "objective failure", m),
            Failure::Other(m) => (1, "error", m),
        };
        eprintln!("corsrbf: {kind}: {msg}");
        ExitCode::from(code)
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::Other(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Lhs(args) => cmd_lhs(args),
        Cmd::Surface(args) => cmd_surface(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let (file, text) = config::load(&args.config).map_err(|e| Failure::Config(e.to_string()))?;
    let overrides = Overrides {
        seed: args.seed,
        workers: args.workers,
        objective: args.objective,
    };
    let plan = config::resolve(file, &text, &overrides).map_err(|e| Failure::Config(e.to_string()))?;
    let cfg = &plan.optimization;
    let objective: Box<dyn Objective> = match &plan.objective {
        ObjectiveSpec::Builtin(name) => Box::new(
            NamedObjective::by_name(name, plan.domain.dim())
                .map_err(|e| Failure::Config(e.to_string()))?,
        ),
        ObjectiveSpec::External(spec) => {
            Box::new(ExternalObjective::new(spec.command.clone(), cfg.workers))
        }
    };
    let result = run_with_progress(objective.as_ref(), &plan.domain, cfg, |p| eprintln!("{p}"))
        .map_err(|e| match e {
            EngineError::Config(c) => Failure::Config(c.to_string()),
            e @ EngineError::Objective { .. } => {
                let done = e.partial_history().map_or(0, <[_]>::len);
                Failure::Objective(format!("{e} ({done} evaluations completed)"))
            }
            other => Failure::Other(other.to_string()),
        })?;
    drop(objective);

    let out = args.out.or(plan.history);
    csvio::write_output(out.as_deref(), |w| {
        csvio::write_history(w, &result.history, plan.domain.dim()).map_err(std::io::Error::other)
    })
    .map_err(io_failure)?;
    let best_x: Vec<String> = result.best_x.iter().map(|v| csvio::num(*v)).collect();
    println!("best_x={} best_f={}", best_x.join(","), csvio::num(result.best_f));
    Ok(())
}

fn cmd_lhs(args: LhsArgs) -> Result<(), Failure> {
    let design = LatinHypercube::diagonal(args.n, args.d).map_err(|e| Failure::Config(e.to_string()))?;
    let initial = spread(&design.to_unit_points()).map_err(|e| Failure::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let design = design.improve(args.attempts, &mut rng);
    let points = design.to_unit_points();
    let last = spread(&points).map_err(|e| Failure::Config(e.to_string()))?;
    csvio::write_output(args.out.as_deref(), |w| {
        csvio::write_design(w, &points, args.d, initial, last)
    })
    .map_err(io_failure)
}

fn surface_domain(config_path: Option<&Path>, dim: usize) -> Result<BoundedDomain, Failure> {
    let Some(path) = config_path else {
        return BoundedDomain::unit(dim).map_err(|e| Failure::Config(e.to_string()));
    };
    let (file, text) = config::load(path).map_err(|e| Failure::Config(e.to_string()))?;
    let plan = config::resolve(file, &text, &Overrides::default())
        .map_err(|e| Failure::Config(e.to_string()))?;
    Ok(plan.domain)
}

fn cmd_surface(args: SurfaceArgs) -> Result<(), Failure> {
    let rows = csvio::read_history(&args.history).map_err(Failure::Config)?;
    let dim = rows.first().map_or(0, |r| r.x.len());
    if dim != 2 {
        return Err(Failure::Config(format!(
            "surface grids need a 2-dimensional history, got {dim}"
        )));
    }
    if rows.len() < dim + 2 {
        return Err(Failure::Config(format!(
            "history has {} rows, at least {} are needed",
            rows.len(),
            dim + 2
        )));
    }
    if args.resolution < 2 {
        return Err(Failure::Config("resolution must be at least 2".into()));
    }
    let domain = surface_domain(args.config.as_deref(), dim)?;
    let mut points = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for r in &rows {
        let unit = domain.to_unit(&r.x).map_err(|e| {
            Failure::Config(format!("history row {}: {e} (pass --config for bounds)", r.index))
        })?;
        points.push(unit);
        values.push(r.f_scaled.ok_or_else(|| {
            Failure::Config(format!("history row {} has no f_scaled value", r.index))
        })?);
    }

    let plain = RbfModel::fit(&points, &values, None).map_err(|e| Failure::Other(e.to_string()))?;
    let model = if args.unscaled {
        plain
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let scaling = compute_space_scaling(&plain, DEFAULT_CLOUD_SIZE, DEFAULT_BEST_FRACTION, &mut rng)
            .map_err(|e| Failure::Other(e.to_string()))?;
        refit_with_scaling(&points, &values, &scaling).map_err(|e| Failure::Other(e.to_string()))?
    };

    let res = args.resolution;
    let coord = |k: usize| k as f64 / (res - 1) as f64;
    let grid: Vec<Vec<f64>> = (0..res)
        .map(|j| {
            (0..res)
                .map(|i| model.evaluate(&[coord(i), coord(j)]).expect("2-d model"))
                .collect()
        })
        .collect();
    csvio::write_output(args.out.as_deref(), |w| {
        csvio::write_grid(w, &grid).map_err(std::io::Error::other)
    })
    .map_err(io_failure)
}
