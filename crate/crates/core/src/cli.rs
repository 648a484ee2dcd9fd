//! Command-line front end: `solve`, `study` and `check`.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytic_examples::ExampleSpec;
use crate::bv_control::JumpControl;
use crate::checks;
use crate::error::Error;
use crate::study::{run_study, StudyOptions};
use crate::support::{OuterConfig, OuterIterate, OuterResult, Termination};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bvcontrol", version, about = "BV-regularized elliptic optimal control with mixed finite elements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Log outer iterations to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the support iteration on one mesh and write the solution as JSON.
    Solve(SolveArgs),
    /// Convergence study over dyadic mesh levels.
    Study(StudyArgs),
    /// Gradient, optimality, consistency and oracle self-checks.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Benchmark name: example1 or example2.
    #[arg(long, default_value = "example1")]
    pub example: String,
    /// Override the regularization weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Support-drift tolerance of the outer iteration.
    #[arg(long, default_value_t = 1e-10)]
    pub epsilon: f64,
    /// Cap on outer iterations.
    #[arg(long, default_value_t = OuterConfig::default().max_outer)]
    pub max_outer: usize,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Number of uniform cells.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Exponent range `A:B`, one level per `N = 2^k`.
    #[arg(long, value_parser = parse_levels, default_value = "2:11")]
    pub levels: (u32, u32),
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for independent levels.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Seed of the random test points.
    #[arg(long, default_value_t = checks::DEFAULT_SEED)]
    pub seed: u64,
    /// Support-drift tolerance used by the optimality runs.
    #[arg(long, default_value_t = 1e-10)]
    pub epsilon: f64,
    /// Write the report to this file instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn parse_levels(s: &str) -> Result<(u32, u32), String> {
    let parse = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("bad level `{t}`: {e}"));
    match s.split_once(':') {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(format!("empty level range {a}:{b}"));
            }
            Ok((a, b))
        }
        None => parse(s).map(|k| (k, k)),
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    example: &'a str,
    n: usize,
    alpha: f64,
    termination: Termination,
    converged: bool,
    outer_iterations: usize,
    assumption_ok: bool,
    cycle_merged: bool,
    objective: f64,
    kkt_residual: f64,
    control: JumpControl,
    nodes: &'a [f64],
    y: &'a [f64],
    p: &'a [f64],
    phi: &'a [f64],
    history: &'a [OuterIterate],
}

fn solve_json(spec: &ExampleSpec, res: &OuterResult) -> String {
    let sol = &res.solution;
    let out = SolveOutput {
        example: &spec.name,
        n: res.mesh().num_cells(),
        alpha: spec.alpha,
        termination: res.termination,
        converged: res.converged(),
        outer_iterations: res.outer_iterations,
        assumption_ok: res.assumption_ok,
        cycle_merged: res.cycle_merged,
        objective: sol.objective,
        kkt_residual: sol.kkt_residual,
        control: sol.control(),
        nodes: res.mesh().nodes(),
        y: sol.y.values(),
        p: sol.p.values(),
        phi: sol.phi.values(),
        history: &res.history,
    };
    let mut s = serde_json::to_string_pretty(&out).expect("solution serializes");
    s.push('\n');
    s
}

fn emit(path: Option<&PathBuf>, text: &str) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn outer_config(epsilon: f64, max_outer: usize) -> OuterConfig {
    OuterConfig { epsilon, max_outer, ..OuterConfig::default() }
}

/// Failure that maps to a process exit code.
struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::InvalidCoefficient(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        };
        Failure(code, e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure(EXIT_FAILURE, format!("i/o error: {e}"))
    }
}

fn solve(args: &SolveArgs) -> Result<i32, Failure> {
    let p = &args.problem;
    let spec = ExampleSpec::by_name(&p.example, p.alpha)?;
    let res = spec.solve(args.n, &outer_config(p.epsilon, p.max_outer))?;
    emit(p.output.as_ref(), &solve_json(&spec, &res))?;
    if !res.converged() {
        return Err(Failure(
            EXIT_FAILURE,
            format!(
                "not converged: termination {:?}, inner converged {}, kkt residual {:.3e}",
                res.termination, res.solution.converged, res.solution.kkt_residual
            ),
        ));
    }
    Ok(EXIT_OK)
}

fn study(args: &StudyArgs) -> Result<i32, Failure> {
    let p = &args.problem;
    let spec = ExampleSpec::by_name(&p.example, p.alpha)?;
    if args.jobs == 0 {
        return Err(Failure(EXIT_USAGE, "--jobs must be at least 1".into()));
    }
    let opts = StudyOptions { levels: args.levels, outer: outer_config(p.epsilon, p.max_outer), jobs: args.jobs, ..Default::default() };
    let report = run_study(&spec, &opts)?;
    let text = match args.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json() + "\n",
    };
    emit(p.output.as_ref(), &text)?;
    let failed: Vec<usize> = report.levels.iter().filter(|l| !l.converged).map(|l| l.n).collect();
    if !failed.is_empty() {
        return Err(Failure(EXIT_FAILURE, format!("levels did not converge: N = {failed:?}")));
    }
    Ok(EXIT_OK)
}

fn check(args: &CheckArgs) -> Result<i32, Failure> {
    let outcomes = checks::run_all(args.seed, &outer_config(args.epsilon, OuterConfig::default().max_outer))?;
    let mut text = String::new();
    for o in &outcomes {
        text.push_str(&format!("{} {}: {}\n", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail));
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    text.push_str(&format!("{} of {} checks passed\n", outcomes.len() - failed, outcomes.len()));
    emit(args.output.as_ref(), &text)?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn init_logging(verbose: bool) {
    let level = if verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses `argv` and runs the selected command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Study(a) => study(a),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}
