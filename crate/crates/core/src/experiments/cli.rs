use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use super::config::ExperimentConfig;
use super::output::{self, OutputFormat};
use super::run;
use crate::generators::{self, EnsembleKind, EnsembleSpec, NoiseKind};
use crate::linalg;
use crate::sampler::SamplerKind;
use crate::schedule::{bound_f, BoundParams, ScheduleParams};
use crate::solver;
use crate::Error;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "KACZMARZ_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "kaczmarz",
    version,
    about = "Randomized Kaczmarz with a scheduled learning rate"
)]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $KACZMARZ_OUT_DIR, then the current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random problem (matrix file plus JSON sidecar).
    GenProblem(GenArgs),
    /// Solve a stored problem and write its per-step trace.
    Solve(SolveArgs),
    /// Tabulate the optimal schedule and its bound.
    Schedule(ScheduleArgs),
    /// Evaluate the error bound f(k).
    Bound(BoundArgs),
    /// Run a multi-trial experiment.
    Experiment(ExperimentArgs),
    /// Check the single-step identities on randomized steps.
    Audit(AuditArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "sparse-sphere")]
    pub kind: EnsembleKind,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    /// Nonzeros per row (sparse-sphere only).
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value = "normal")]
    pub noise: NoiseKind,
    /// File stem for `<name>.mat` and `<name>.json`.
    #[arg(long, default_value = "problem")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum CliPolicy {
    Scheduled,
    Constant,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem sidecar written by `gen-problem`.
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value = "scheduled")]
    pub policy: CliPolicy,
    /// Rate for the constant policy.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Defaults to 1/n.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Defaults to n/σ².
    #[arg(long)]
    pub beta0: Option<f64>,
    /// Defaults to m.
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long, value_enum, default_value = "weighted")]
    pub sampler: SamplerKind,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long)]
    pub kmax: Option<u64>,
    /// Print every `stride`-th row.
    #[arg(long, default_value_t = 1)]
    pub stride: u64,
    /// Write the six continuous-rate tables for the noise and `η` sweeps.
    #[arg(long)]
    pub figure3: bool,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub eta: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long = "x0-err2")]
    pub x0_err2: f64,
    #[arg(long)]
    pub k: f64,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long = "kmax")]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Single-seed per-step traces instead of trial aggregates.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    /// Largest acceptable relative residual.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

fn out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn print_paths(w: &mut dyn Write, paths: &[PathBuf]) -> Result<(), Error> {
    for p in paths {
        writeln!(w, "wrote {}", p.display())?;
    }
    Ok(())
}

fn gen_problem(cli: &Cli, a: &GenArgs, w: &mut dyn Write) -> Result<(), Error> {
    let spec = EnsembleSpec {
        kind: a.kind,
        m: a.m,
        n: a.n,
        s: a.s,
        sigma: a.sigma,
        seed: cli.seed.unwrap_or(0),
    };
    let noise = a.noise;
    let p = generators::generate_problem(&spec, noise)?;
    let dir = out_dir(cli.out.as_deref(), None);
    let (mat, json) = generators::write_problem(&dir, &a.name, &p, Some(spec.seed), Some(noise))?;
    print_paths(w, &[mat, json])
}

fn solve(cli: &Cli, a: &SolveArgs, w: &mut dyn Write) -> Result<(), Error> {
    let (p, _) = generators::read_problem(&a.problem)?;
    let policy = match a.policy {
        CliPolicy::Constant => solver::RatePolicy::Constant(a.mu),
        CliPolicy::Scheduled => {
            let eta = a.eta.unwrap_or(1.0 / p.cols() as f64);
            let sigma2 = p.sigma * p.sigma;
            let params = match a.beta0 {
                Some(b) => ScheduleParams::new(eta, sigma2, b)?,
                None => ScheduleParams::from_error(eta, sigma2, p.cols() as f64)?,
            };
            solver::RatePolicy::ScheduledOptimal(params)
        }
    };
    let k_max = a.kmax.unwrap_or(p.rows());
    let trace = solver::solve(&p, &policy, a.sampler, cli.seed.unwrap_or(0), k_max)?;
    let x_norm2 = p.x_true.as_deref().map(linalg::norm2);
    let dir = out_dir(cli.out.as_deref(), None);
    let path = match cli.format {
        OutputFormat::Csv => {
            let path = dir.join(format!("trace_{}.csv", policy.label()));
            std::fs::create_dir_all(&dir)?;
            std::fs::write(&path, output::trace_csv(&trace, x_norm2))?;
            path
        }
        OutputFormat::Json => {
            let path = dir.join(format!("solution_{}.json", policy.label()));
            let doc = serde_json::json!({
                "policy": policy.label(),
                "k_max": k_max,
                "x_final": trace.x_final,
                "sq_error": trace.sq_error_curve(),
            });
            std::fs::create_dir_all(&dir)?;
            std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
            path
        }
    };
    print_paths(w, &[path])
}

fn schedule(cli: &Cli, a: &ScheduleArgs, w: &mut dyn Write) -> Result<(), Error> {
    if a.figure3 {
        let dir = out_dir(cli.out.as_deref(), None);
        let paths = output::figure3_tables(&dir, a.stride)?;
        return print_paths(w, &paths);
    }
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::Config(format!("--{name} is required unless --figure3 is given")))
    };
    let params = ScheduleParams::new(
        need(a.eta, "eta")?,
        a.sigma * a.sigma,
        need(a.beta0, "beta0")?,
    )?;
    let k_max = a
        .kmax
        .ok_or_else(|| Error::Config("--kmax is required unless --figure3 is given".into()))?;
    match cli.format {
        OutputFormat::Csv => write!(
            w,
            "{}",
            output::emit_schedule_table(&params, k_max, a.stride)?
        )?,
        OutputFormat::Json => {
            let rows: Vec<_> = params
                .iter()
                .take_while(|s| s.k <= k_max)
                .filter(|s| s.k % a.stride.max(1) == 0 || s.k == k_max)
                .map(|s| serde_json::json!({"k": s.k, "alpha": s.alpha, "beta": s.beta}))
                .collect();
            writeln!(w, "{}", serde_json::to_string_pretty(&rows)?)?;
        }
    }
    Ok(())
}

fn bound(cli: &Cli, a: &BoundArgs, w: &mut dyn Write) -> Result<(), Error> {
    let bp = BoundParams::new(a.eta, a.sigma * a.sigma, a.x0_err2)?;
    let f = bound_f(a.k, &bp)?;
    match cli.format {
        OutputFormat::Csv => writeln!(w, "{f:?}")?,
        OutputFormat::Json => writeln!(w, "{}", serde_json::json!({"k": a.k, "f": f, "c": bp.c}))?,
    }
    Ok(())
}

fn experiment(cli: &Cli, a: &ExperimentArgs, w: &mut dyn Write) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::example1(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(k) = a.k_max {
        cfg.k_max = Some(k);
    }
    if let Some(eta) = a.eta {
        cfg.eta = Some(eta);
    }
    if let Some(sigma) = a.sigma {
        cfg.ensemble.sigma = sigma;
    }
    cfg.validate()?;
    let dir = out_dir(cli.out.as_deref(), cfg.output.as_deref());

    if a.trace {
        let (p, traces) = run::run_trace(&cfg)?;
        let x_norm2 = p.x_true.as_deref().map(linalg::norm2);
        let mut paths = Vec::new();
        std::fs::create_dir_all(&dir)?;
        for (label, t) in &traces {
            let path = dir.join(format!("trace_{label}.csv"));
            std::fs::write(&path, output::trace_csv(t, x_norm2))?;
            paths.push(path);
        }
        return print_paths(w, &paths);
    }
    let result = match a.workers {
        Some(n) => run::run_experiment_with_workers(&cfg, n)?,
        None => run::run_experiment(&cfg)?,
    };
    let paths = output::write_experiment(&result, &dir, cli.format)?;
    print_paths(w, &paths)
}

fn audit(cli: &Cli, a: &AuditArgs, w: &mut dyn Write) -> Result<(), Error> {
    let s = solver::audit_suite(cli.seed.unwrap_or(0), a.steps)?;
    match cli.format {
        OutputFormat::Csv => {
            writeln!(w, "steps,worst_pythagorean,worst_decomposition")?;
            writeln!(
                w,
                "{},{:?},{:?}",
                s.steps, s.worst_pythagorean, s.worst_decomposition
            )?;
        }
        OutputFormat::Json => writeln!(w, "{}", serde_json::to_string(&s)?)?,
    }
    let worst = s.worst_pythagorean.max(s.worst_decomposition);
    if worst > a.tol {
        return Err(Error::Config(format!(
            "audit residual {worst:e} exceeds {:e}",
            a.tol
        )));
    }
    Ok(())
}

/// Executes a parsed command line, writing results to `w`.
pub fn execute(cli: &Cli, w: &mut dyn Write) -> Result<(), Error> {
    match &cli.command {
        Command::GenProblem(a) => gen_problem(cli, a, w),
        Command::Solve(a) => solve(cli, a, w),
        Command::Schedule(a) => schedule(cli, a, w),
        Command::Bound(a) => bound(cli, a, w),
        Command::Experiment(a) => experiment(cli, a, w),
        Command::Audit(a) => audit(cli, a, w),
    }
}

/// Parses `argv`, runs it, and maps failures to exit codes: usage errors
/// exit with clap's status, validation and runtime errors with 1.
pub fn cli_main<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
