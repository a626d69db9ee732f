use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gridrisk::fixtures::fixture;
use gridrisk::montecarlo::{simulate, Model, SimulationConfig};
use gridrisk::optimizer::{grid_minimize, minimize, minimize_multi, proportional_dispatch, Evaluator, MinimizeOptions, OptimizationResult};
use gridrisk::report::{
    compare_rows, line_rows, parse_start_file, parse_start_vector, write_compare_csv, write_line_csv,
    write_simulation_csv, write_thresholds_csv,
};
use gridrisk::{load_network, DispatchProblem};

#[derive(Parser, Debug)]
#[command(name = "gridrisk", version, about = "Risk-aware dispatch for stochastic power networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-line report at one decision vector.
    Evaluate(EvalArgs),
    /// Projected subgradient minimization.
    Optimize(OptimizeArgs),
    /// Exhaustive lattice search.
    Grid(GridArgs),
    /// Report for the proportional dispatch.
    Proportional(Common),
    /// Monte Carlo validation of the invariant statistics.
    Simulate(SimulateArgs),
    /// Proportional dispatch against the optimized one.
    Compare(OptimizeArgs),
    /// Table of (epsilon, r_epsilon).
    Thresholds(OutArgs),
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Common {
    /// Network file.
    #[arg(long, required_unless_present = "fixture", conflicts_with = "fixture")]
    network: Option<PathBuf>,
    /// Built-in fixture name instead of a file.
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long)]
    r_epsilon: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Decision vector p_1,...,p_{n+-1}; proportional dispatch when absent.
    #[arg(long, alias = "point")]
    start: Option<String>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    common: Common,
    /// Start vector; proportional dispatch when absent.
    #[arg(long, conflicts_with = "multi_start")]
    start: Option<String>,
    /// File with one start vector per line.
    #[arg(long)]
    multi_start: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Step constant c of the c/sqrt(t) schedule, in p.u.
    #[arg(long, default_value_t = 0.5)]
    step: f64,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 150)]
    steps: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Linearized,
    Nonlinear,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Decision vector; proportional dispatch when absent.
    #[arg(long)]
    start: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 600.0)]
    horizon: f64,
    #[arg(long, default_value_t = 50.0)]
    burn_in: f64,
    #[arg(long, default_value_t = 0.1)]
    sample_every: f64,
    #[arg(long, default_value_t = 10)]
    paths: usize,
    #[arg(long, value_enum, default_value_t = ModelArg::Linearized)]
    model: ModelArg,
}

/// Failures mapped to exit status 2.
#[derive(Debug)]
struct Infeasible(String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Infeasible {}

fn load(common: &Common) -> anyhow::Result<DispatchProblem> {
    let mut prob = match (&common.network, &common.fixture) {
        (Some(path), _) => load_network(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(name)) => fixture(name)?,
        (None, None) => bail!("one of --network or --fixture is required"),
    };
    if let Some(r) = common.r_epsilon {
        prob.r_epsilon = r;
        prob.validate()?;
    }
    Ok(prob)
}

fn output(args: &OutArgs) -> anyhow::Result<Box<dyn Write>> {
    Ok(match &args.out {
        Some(path) => Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn decision(prob: &DispatchProblem, start: &Option<String>) -> anyhow::Result<Vec<f64>> {
    match start {
        Some(s) => {
            let v = parse_start_vector(s)?;
            if v.len() != prob.decision_dim() {
                bail!("start vector has {} entries, expected {}", v.len(), prob.decision_dim());
            }
            Ok(v)
        }
        None => {
            let p = proportional_dispatch(prob);
            Ok(p[..prob.decision_dim()].to_vec())
        }
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",")
}

fn summarize(label: &str, r: &OptimizationResult) {
    eprintln!(
        "{label}: f_star={:.4} p_supply={} termination={:?} iterations={} time={:.2}s",
        r.f_star,
        fmt_vec(&r.supply),
        r.termination,
        r.iterations,
        r.wall_time.as_secs_f64()
    );
}

fn run_optimizer(ev: &Evaluator, args: &OptimizeArgs) -> anyhow::Result<OptimizationResult> {
    let opts = MinimizeOptions { max_iter: args.max_iter, tol: args.tol, step: args.step, ..Default::default() };
    let prob = &ev.problem;
    let result = match &args.multi_start {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let starts = parse_start_file(&text)?;
            if let Some(s) = starts.iter().find(|s| s.len() != prob.decision_dim()) {
                bail!("start vector {s:?} has wrong length, expected {}", prob.decision_dim());
            }
            minimize_multi(ev, &starts, &opts)?
        }
        None => minimize(ev, &decision(prob, &args.start)?, &opts)?,
    };
    Ok(result)
}

fn report_at(ev: &Evaluator, p_s: &[f64], out: &OutArgs) -> anyhow::Result<()> {
    let eval = ev.evaluate(p_s)?;
    if !eval.is_ok() {
        return Err(Infeasible(format!(
            "synchronous state at {} is not usable: {:?}",
            fmt_vec(p_s),
            eval.status
        ))
        .into());
    }
    write_line_csv(output(out)?, &line_rows(ev, &eval)?)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Thresholds(out) => write_thresholds_csv(output(&out)?)?,
        Command::Evaluate(args) => {
            let prob = load(&args.common)?;
            let ev = Evaluator::new(&prob)?;
            let p_s = decision(&prob, &args.start)?;
            let violations = ev.polytope.violations(&p_s);
            if !violations.is_empty() {
                return Err(Infeasible(format!("decision vector outside the feasible set: {}", violations.join("; "))).into());
            }
            let eval = ev.evaluate(&p_s)?;
            eprintln!("f={:.4} p_supply={}", eval.f_value, fmt_vec(&prob.supply_vector(&p_s)));
            report_at(&ev, &p_s, &args.common.out)?;
        }
        Command::Proportional(common) => {
            let prob = load(&common)?;
            let ev = Evaluator::new(&prob)?;
            let p = proportional_dispatch(&prob);
            eprintln!("p_supply={}", fmt_vec(&p));
            report_at(&ev, &p[..prob.decision_dim()], &common.out)?;
        }
        Command::Optimize(args) => {
            let prob = load(&args.common)?;
            let ev = Evaluator::new(&prob)?;
            let r = run_optimizer(&ev, &args)?;
            summarize("optimize", &r);
            report_at(&ev, &r.p_s_star, &args.common.out)?;
        }
        Command::Grid(args) => {
            let prob = load(&args.common)?;
            let ev = Evaluator::new(&prob)?;
            let r = grid_minimize(&ev, args.steps)?;
            summarize("grid", &r);
            report_at(&ev, &r.p_s_star, &args.common.out)?;
        }
        Command::Compare(args) => {
            let prob = load(&args.common)?;
            let ev = Evaluator::new(&prob)?;
            let p = proportional_dispatch(&prob);
            let base = ev.evaluate(&p[..prob.decision_dim()])?;
            if !base.is_ok() {
                return Err(Infeasible(format!("proportional dispatch is not usable: {:?}", base.status)).into());
            }
            let r = run_optimizer(&ev, &args)?;
            summarize("with", &r);
            eprintln!("without: f={:.4} p_supply={}", base.f_value, fmt_vec(&p));
            let with = ev.evaluate(&r.p_s_star)?;
            let rows = compare_rows(&line_rows(&ev, &base)?, &line_rows(&ev, &with)?);
            write_compare_csv(output(&args.common.out)?, &rows)?;
        }
        Command::Simulate(args) => {
            let prob = load(&args.common)?;
            let ev = Evaluator::new(&prob)?;
            let p_s = decision(&prob, &args.start)?;
            let eval = ev.evaluate(&p_s)?;
            if !eval.is_ok() {
                return Err(Infeasible(format!("cannot simulate from {:?}", eval.status)).into());
            }
            let cfg = SimulationConfig {
                dt: args.dt,
                horizon: args.horizon,
                burn_in: args.burn_in,
                paths: args.paths,
                seed: args.seed,
                model: match args.model {
                    ModelArg::Linearized => Model::Linearized,
                    ModelArg::Nonlinear => Model::Nonlinear,
                },
                sample_every: args.sample_every,
            };
            let rep = simulate(&prob, &p_s, &cfg)?;
            let labels: Vec<_> = (0..prob.network.line_count()).map(|k| prob.network.line_label(k)).collect();
            write_simulation_csv(output(&args.common.out)?, &labels, &eval.sigma, &rep)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Infeasible>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
