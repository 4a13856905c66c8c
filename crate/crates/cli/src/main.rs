mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use multisecant::bench::{emit_profile, emit_results, performance_profile, run_suite, write_results, ProfileMetric};
use multisecant::problems::{default_suite, ProblemKind, SuiteEntry};
use multisecant::solver::{solve, InitialJacobian, Method, SolverConfig};
use multisecant::default_tau_grid;

use config::ConfigFile;

/// Quasi-Newton solvers for nonlinear systems and a benchmark harness.
#[derive(Debug, Parser)]
#[command(name = "multisecant", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem with one method and print the report.
    Solve(SolveArgs),
    /// Run methods over a problem suite and write records and profiles.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Memory depth m (defaults to the problem dimension).
    #[arg(long)]
    memory: Option<usize>,
    /// Relative stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    max_feval: Option<usize>,
    /// Independence threshold for the secant and interpolation sets.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sigma1: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    theta_bar: Option<f64>,
    /// Initial Jacobian: identity, scaled-identity or finite-difference.
    #[arg(long)]
    b0: Option<InitialJacobian>,
    /// key=value settings file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// qn1 (Broyden), qn2, qn3 or qn4.
    #[arg(long)]
    method: Option<Method>,
    /// Problem name, e.g. rosenbrock or discrete-boundary-value.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Print one line per iteration.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Methods to run, comma separated (default: all four).
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    /// Problems as `name`, `name:n` or `name-x10:n`, comma separated
    /// (default: the full 30-instance suite).
    #[arg(long, value_delimiter = ',')]
    problem: Vec<String>,
    /// Dimensions used for problems given without one.
    #[arg(long, value_delimiter = ',')]
    dim: Vec<usize>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Per-run records CSV (printed to stdout when omitted).
    #[arg(long)]
    out_results: Option<PathBuf>,
    #[arg(long)]
    out_profile_iters: Option<PathBuf>,
    #[arg(long)]
    out_profile_fevals: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn solver_config(args: &SolverArgs, file: &ConfigFile) -> Result<SolverConfig> {
    let mut cfg = SolverConfig::default();
    macro_rules! merge {
        ($field:ident, $key:literal, $target:expr) => {
            if let Some(v) = args.$field.clone().or(file.get($key)?) {
                $target = v;
            }
        };
    }
    merge!(tol, "tol", cfg.tol);
    merge!(max_iter, "max-iter", cfg.max_iter);
    merge!(max_feval, "max-feval", cfg.max_feval);
    merge!(sigma, "sigma", cfg.sigma);
    merge!(sigma1, "sigma1", cfg.sigma1);
    merge!(sigma2, "sigma2", cfg.sigma2);
    merge!(rho, "rho", cfg.rho);
    merge!(beta, "beta", cfg.beta);
    merge!(theta_bar, "theta-bar", cfg.theta.theta_bar);
    merge!(b0, "b0", cfg.initial_jacobian);
    if let Some(m) = args.memory.or(file.get("memory")?) {
        cfg.memory_depth = Some(m);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let file = load_config(&args.solver.config)?;
    let cfg = solver_config(&args.solver, &file)?;
    let method = args.method.or(file.get("method")?).unwrap_or(Method::Qn4);
    let name = match args.problem.or(file.get("problem")?) {
        Some(name) => name,
        None => bail!("--problem is required"),
    };
    let kind: ProblemKind = name.parse()?;
    let dim = match args.dim.or(file.get("dim")?) {
        Some(n) => n,
        None => match kind.allowed_dims() {
            [only] => *only,
            dims => bail!("--dim is required for {kind} (one of {dims:?})"),
        },
    };
    let mut problem = multisecant::problems::ProblemSpec::builtin(kind, dim)?;
    let started = Instant::now();
    let report = solve(&mut problem, method, &cfg)?;
    let elapsed = started.elapsed();

    if args.trace {
        println!("{:>5} {:>12} {:>12} {:>10} {:>8} {:>4} {:>6}", "k", "|F_k|", "|s_k|", "lambda", "theta", "mem", "fevals");
        for r in &report.trace {
            let theta = r.theta.map_or_else(|| "skip".to_string(), |t| format!("{t:.3}"));
            println!(
                "{:>5} {:>12.4e} {:>12.4e} {:>10.3e} {:>8} {:>4} {:>6}",
                r.k, r.f_norm, r.step_norm, r.lambda, theta, r.memory_size, r.fevals
            );
        }
    }
    println!("problem     {kind} (n = {dim})");
    println!("method      {method}");
    println!("status      {}", report.status);
    println!("iterations  {}", report.iterations);
    println!("fevals      {}", report.fevals);
    println!("|F(x0)|     {:.6e}", report.f_norm_initial);
    println!("|F(x)|      {:.6e}", report.f_norm_final);
    println!("restarts    {}", report.restarts);
    println!("time        {:.3} ms", elapsed.as_secs_f64() * 1e3);
    let xs: Vec<String> = report.x_final.iter().map(|v| format!("{v:.10e}")).collect();
    println!("x           [{}]", xs.join(", "));
    Ok(())
}

fn parse_problems(items: &[String], dims: &[usize]) -> Result<Vec<SuiteEntry>> {
    let mut out = Vec::new();
    for item in items {
        if item.contains(':') {
            out.push(item.parse::<SuiteEntry>()?);
            continue;
        }
        let kind: ProblemKind = item.parse()?;
        let wanted: Vec<usize> = if dims.is_empty() {
            kind.allowed_dims().to_vec()
        } else {
            dims.iter().copied().filter(|n| kind.allowed_dims().contains(n)).collect()
        };
        if wanted.is_empty() {
            bail!("{kind} supports none of the dimensions {dims:?} (allowed: {:?})", kind.allowed_dims());
        }
        out.extend(wanted.into_iter().map(|n| SuiteEntry::new(kind, n)));
    }
    Ok(out)
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let file = load_config(&args.solver.config)?;
    let cfg = solver_config(&args.solver, &file)?;
    let methods = if args.method.is_empty() { file.list("method")? } else { args.method };
    let methods = if methods.is_empty() { Method::ALL.to_vec() } else { methods };
    let problems = if args.problem.is_empty() { file.list("problem")? } else { args.problem };
    let dims = if args.dim.is_empty() { file.list("dim")? } else { args.dim };
    let suite = if problems.is_empty() {
        let all = default_suite();
        if dims.is_empty() {
            all
        } else {
            all.into_iter().filter(|e| dims.contains(&e.n)).collect()
        }
    } else {
        parse_problems(&problems, &dims)?
    };
    let jobs = args.jobs.or(file.get("jobs")?).unwrap_or(0);
    let out_results: Option<PathBuf> = args.out_results.or(file.get("out-results")?);
    let out_iters: Option<PathBuf> = args.out_profile_iters.or(file.get("out-profile-iters")?);
    let out_fevals: Option<PathBuf> = args.out_profile_fevals.or(file.get("out-profile-fevals")?);

    let started = Instant::now();
    let records = run_suite(&methods, &suite, &cfg, jobs)?;
    let elapsed = started.elapsed();

    match &out_results {
        Some(path) => emit_results(&records, path).with_context(|| format!("writing {}", path.display()))?,
        None => write_results(&records, std::io::stdout().lock())?,
    }
    let taus = default_tau_grid();
    for (metric, path) in [(ProfileMetric::Iterations, &out_iters), (ProfileMetric::Fevals, &out_fevals)] {
        if let Some(path) = path {
            let table = performance_profile(&records, metric, &taus)?;
            emit_profile(&table, path).with_context(|| format!("writing {}", path.display()))?;
        }
    }

    eprintln!(
        "{} cells ({} problems x {} methods) in {:.1} ms",
        records.len(),
        suite.len(),
        methods.len(),
        elapsed.as_secs_f64() * 1e3
    );
    for m in &methods {
        let solved = records.iter().filter(|r| r.method == *m && r.converged()).count();
        eprintln!("  {m}: {solved}/{} converged", suite.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Bench(args) => run_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
