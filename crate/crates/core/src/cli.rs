//! Command-line front end.
//!
//! Every run or study flag may also come from a flat JSON file given by `--config`, whose keys
//! are the flag names without dashes prefix (`"final-time": 0.1`). Flags on the command line
//! take precedence over the file, which takes precedence over the built-in defaults.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fespace::SpaceKind;
use crate::harness::{self, Format, StudyPlan, DEFAULT_LADDER, DEFAULT_STEPS};
use crate::oracle;
use crate::problem::ProblemCase;
use crate::stepper::{self, LinearSolverKind, RunConfig};
use crate::{cq, fespace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "subdiffusion", version, about = "Time-fractional subdiffusion solvers and convergence studies")]
struct Cli {
    /// More progress output on standard error (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only report errors on standard error.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Run one simulation and report the final state.
    Solve(RunArgs),
    /// Spatial convergence study against a reference solution on a refined mesh.
    Study(RunArgs),
    /// Temporal convergence of the scalar scheme against the Mittag-Leffler function.
    TemporalStudy(TemporalArgs),
    /// Reference function values.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
    /// Print convolution quadrature weights as CSV.
    Weights {
        /// Fractional order in (0, 1].
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Largest weight index.
        #[arg(long, default_value_t = 16)]
        n: usize,
    },
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Mittag-Leffler function E_alpha(-x).
    Ml {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        x: f64,
    },
}

/// Flags shared by `solve` and `study`; unset flags fall back to the config file, then to the
/// defaults.
#[derive(Debug, Clone, Default, Args)]
struct RunArgs {
    /// Fractional order in (0, 1] [default: 0.5].
    #[arg(long)]
    alpha: Option<f64>,
    /// Final time [default: 0.1].
    #[arg(long)]
    final_time: Option<f64>,
    /// Number of time steps [default: 512].
    #[arg(long)]
    steps: Option<usize>,
    /// Subdivisions per side for `solve` [default: 16].
    #[arg(long)]
    mesh: Option<usize>,
    /// Comma-separated mesh ladder for `study` [default: 8,16,32,64].
    #[arg(long, value_delimiter = ',')]
    mesh_ladder: Option<Vec<usize>>,
    /// Reference mesh for `study` [default: 4 x finest ladder mesh].
    #[arg(long)]
    ref_mesh: Option<usize>,
    /// Reference time steps for `study` [default: --steps].
    #[arg(long)]
    ref_steps: Option<usize>,
    /// Finite element: p1, p1nc or rt0 [default: p1].
    #[arg(long)]
    fem: Option<SpaceKind>,
    /// Problem: a, b, manufactured or linear [default: a].
    #[arg(long)]
    case: Option<ProblemCase>,
    /// Relative fixed-point tolerance [default: 1e-10].
    #[arg(long)]
    fp_tol: Option<f64>,
    /// Fixed-point iteration limit [default: 50].
    #[arg(long)]
    fp_max_iters: Option<usize>,
    /// Linear solver: direct or cg [default: direct].
    #[arg(long, value_parser = parse_solver)]
    solver: Option<LinearSolverKind>,
    /// Evaluate the source at the previous step instead of iterating (diagnostic).
    #[arg(long)]
    linearized: bool,
    /// Output file [default: standard output].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv, markdown or json [default: csv for study, json for solve].
    #[arg(long)]
    format: Option<Format>,
    /// Flat JSON file of flag values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct TemporalArgs {
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Decay rate of the scalar problem.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    final_time: f64,
    /// Comma-separated step counts.
    #[arg(long, value_delimiter = ',', default_values_t = [64, 128, 256, 512])]
    steps_ladder: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

fn parse_solver(s: &str) -> std::result::Result<LinearSolverKind, String> {
    match s {
        "direct" => Ok(LinearSolverKind::Direct),
        "cg" => Ok(LinearSolverKind::Cg),
        _ => Err(format!("unknown solver '{s}' (expected direct or cg)")),
    }
}

fn solver_name(s: LinearSolverKind) -> &'static str {
    match s {
        LinearSolverKind::Direct => "direct",
        LinearSolverKind::Cg => "cg",
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    alpha: Option<f64>,
    final_time: Option<f64>,
    steps: Option<usize>,
    mesh: Option<usize>,
    mesh_ladder: Option<Vec<usize>>,
    ref_mesh: Option<usize>,
    ref_steps: Option<usize>,
    fem: Option<String>,
    case: Option<String>,
    fp_tol: Option<f64>,
    fp_max_iters: Option<usize>,
    solver: Option<String>,
    linearized: Option<bool>,
    out: Option<PathBuf>,
    format: Option<String>,
}

fn load_file(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("config file {}: {e}", path.display())))
}

fn parsed<T: std::str::FromStr<Err = Error>>(v: Option<String>) -> Result<Option<T>> {
    v.map(|s| s.parse()).transpose()
}

/// Command-line flags override the file.
fn merge(cli: RunArgs, file: FileConfig) -> Result<RunArgs> {
    Ok(RunArgs {
        alpha: cli.alpha.or(file.alpha),
        final_time: cli.final_time.or(file.final_time),
        steps: cli.steps.or(file.steps),
        mesh: cli.mesh.or(file.mesh),
        mesh_ladder: cli.mesh_ladder.or(file.mesh_ladder),
        ref_mesh: cli.ref_mesh.or(file.ref_mesh),
        ref_steps: cli.ref_steps.or(file.ref_steps),
        fem: cli.fem.or(parsed(file.fem)?),
        case: cli.case.or(parsed(file.case)?),
        fp_tol: cli.fp_tol.or(file.fp_tol),
        fp_max_iters: cli.fp_max_iters.or(file.fp_max_iters),
        solver: match cli.solver {
            Some(s) => Some(s),
            None => file.solver.map(|s| parse_solver(&s)).transpose().map_err(Error::InvalidConfig)?,
        },
        linearized: cli.linearized || file.linearized.unwrap_or(false),
        out: cli.out.or(file.out),
        format: cli.format.or(parsed(file.format)?),
        config: None,
    })
}

/// A fully resolved command.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Solve { run: RunConfig, out: Option<PathBuf>, format: Format },
    Study { plan: StudyPlan, out: Option<PathBuf>, format: Format },
    TemporalStudy { alpha: f64, lambda: f64, final_time: f64, ladder: Vec<usize>, out: Option<PathBuf>, format: Format },
    OracleMl { alpha: f64, x: f64 },
    Weights { alpha: f64, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    /// 0 quiet, 1 default, 2+ verbose.
    pub verbosity: u8,
}

/// Parse failure, distinguishing help and version requests from usage errors.
#[derive(Debug)]
pub enum ParseOutcome {
    Help(String),
    Usage(String),
}

pub const DEFAULT_SOLVE_MESH: usize = 16;

fn reject(flag: &str, command: &str) -> Result<()> {
    Err(Error::InvalidConfig(format!(
        "--{flag} does not apply to `{command}`; remove it or use the matching subcommand"
    )))
}

fn resolve_solve(a: RunArgs) -> Result<Command> {
    if a.mesh_ladder.is_some() {
        reject("mesh-ladder", "solve")?;
    }
    if a.ref_mesh.is_some() {
        reject("ref-mesh", "solve")?;
    }
    if a.ref_steps.is_some() {
        reject("ref-steps", "solve")?;
    }
    let space = a.fem.unwrap_or(SpaceKind::P1);
    let case = a.case.unwrap_or(ProblemCase::A);
    let mut run = RunConfig::new(space, case, a.mesh.unwrap_or(DEFAULT_SOLVE_MESH), a.steps.unwrap_or(DEFAULT_STEPS));
    run.alpha = a.alpha.unwrap_or(run.alpha);
    run.final_time = a.final_time.unwrap_or(run.final_time);
    run.fp_tol = a.fp_tol.unwrap_or(run.fp_tol);
    run.fp_max_iters = a.fp_max_iters.unwrap_or(run.fp_max_iters);
    run.solver = a.solver.unwrap_or_default();
    run.linearized = a.linearized;
    run.validate()?;
    Ok(Command::Solve { run, out: a.out, format: a.format.unwrap_or(Format::Json) })
}

fn resolve_study(a: RunArgs) -> Result<Command> {
    if a.mesh.is_some() {
        return Err(Error::InvalidConfig(
            "--mesh does not apply to `study`; give the resolutions with --mesh-ladder".into(),
        ));
    }
    let mut plan = StudyPlan::new(a.fem.unwrap_or(SpaceKind::P1), a.case.unwrap_or(ProblemCase::A));
    plan.alpha = a.alpha.unwrap_or(plan.alpha);
    plan.final_time = a.final_time.unwrap_or(plan.final_time);
    plan.ladder = a.mesh_ladder.unwrap_or_else(|| DEFAULT_LADDER.to_vec());
    plan.steps = a.steps.unwrap_or(DEFAULT_STEPS);
    plan.ref_mesh = a.ref_mesh.unwrap_or_else(|| harness::default_ref_mesh(&plan.ladder));
    plan.ref_steps = a.ref_steps.unwrap_or_else(|| harness::default_ref_steps(plan.steps));
    plan.fp_tol = a.fp_tol.unwrap_or(plan.fp_tol);
    plan.fp_max_iters = a.fp_max_iters.unwrap_or(plan.fp_max_iters);
    plan.solver = a.solver.unwrap_or_default();
    plan.linearized = a.linearized;
    plan.validate()?;
    Ok(Command::Study { plan, out: a.out, format: a.format.unwrap_or(Format::Csv) })
}

/// Parses `argv` (including the program name) into a validated configuration.
pub fn parse<I, T>(argv: I) -> std::result::Result<CliConfig, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            ParseOutcome::Help(e.to_string())
        }
        _ => ParseOutcome::Usage(e.to_string()),
    })?;
    let usage = |e: Error| ParseOutcome::Usage(format!("error: {e}"));
    let with_file = |a: RunArgs| -> Result<RunArgs> {
        match &a.config {
            Some(path) => {
                let file = load_file(path)?;
                merge(a, file)
            }
            None => Ok(a),
        }
    };
    let command = match cli.command {
        CliCommand::Solve(a) => resolve_solve(with_file(a).map_err(usage)?).map_err(usage)?,
        CliCommand::Study(a) => resolve_study(with_file(a).map_err(usage)?).map_err(usage)?,
        CliCommand::TemporalStudy(t) => {
            cq::validate_alpha(t.alpha).map_err(usage)?;
            if !(t.lambda > 0.0) || !(t.final_time > 0.0) {
                return Err(usage(Error::InvalidConfig("--lambda and --final-time must be positive".into())));
            }
            Command::TemporalStudy {
                alpha: t.alpha,
                lambda: t.lambda,
                final_time: t.final_time,
                ladder: t.steps_ladder,
                out: t.out,
                format: t.format,
            }
        }
        CliCommand::Oracle { which: OracleCommand::Ml { alpha, x } } => {
            cq::validate_alpha(alpha).map_err(usage)?;
            if !(x >= 0.0) {
                return Err(usage(Error::InvalidConfig(format!("--x must be nonnegative, got {x}"))));
            }
            Command::OracleMl { alpha, x }
        }
        CliCommand::Weights { alpha, n } => {
            cq::validate_alpha(alpha).map_err(usage)?;
            Command::Weights { alpha, n }
        }
    };
    let verbosity = if cli.quiet { 0 } else { 1 + cli.verbose };
    Ok(CliConfig { command, verbosity })
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Canonical argument list (without program name) that parses back to `config`.
pub fn render(config: &CliConfig) -> Vec<String> {
    let mut args: Vec<String> = Vec::new();
    let mut flag = |name: &str, value: String| {
        args.push(format!("--{name}"));
        args.push(value);
    };
    let mut tail: Vec<String> = Vec::new();
    let command = match &config.command {
        Command::Solve { run, out, format } => {
            flag("alpha", run.alpha.to_string());
            flag("final-time", run.final_time.to_string());
            flag("steps", run.steps.to_string());
            flag("mesh", run.mesh.to_string());
            flag("fem", run.space.to_string());
            flag("case", run.case.to_string());
            flag("fp-tol", run.fp_tol.to_string());
            flag("fp-max-iters", run.fp_max_iters.to_string());
            flag("solver", solver_name(run.solver).into());
            flag("format", format.to_string());
            if let Some(p) = out {
                flag("out", p.display().to_string());
            }
            if run.linearized {
                tail.push("--linearized".into());
            }
            vec!["solve"]
        }
        Command::Study { plan, out, format } => {
            flag("alpha", plan.alpha.to_string());
            flag("final-time", plan.final_time.to_string());
            flag("steps", plan.steps.to_string());
            flag("mesh-ladder", join(&plan.ladder));
            flag("ref-mesh", plan.ref_mesh.to_string());
            flag("ref-steps", plan.ref_steps.to_string());
            flag("fem", plan.space.to_string());
            flag("case", plan.case.to_string());
            flag("fp-tol", plan.fp_tol.to_string());
            flag("fp-max-iters", plan.fp_max_iters.to_string());
            flag("solver", solver_name(plan.solver).into());
            flag("format", format.to_string());
            if let Some(p) = out {
                flag("out", p.display().to_string());
            }
            if plan.linearized {
                tail.push("--linearized".into());
            }
            vec!["study"]
        }
        Command::TemporalStudy { alpha, lambda, final_time, ladder, out, format } => {
            flag("alpha", alpha.to_string());
            flag("lambda", lambda.to_string());
            flag("final-time", final_time.to_string());
            flag("steps-ladder", join(ladder));
            flag("format", format.to_string());
            if let Some(p) = out {
                flag("out", p.display().to_string());
            }
            vec!["temporal-study"]
        }
        Command::OracleMl { alpha, x } => {
            flag("alpha", alpha.to_string());
            flag("x", x.to_string());
            vec!["oracle", "ml"]
        }
        Command::Weights { alpha, n } => {
            flag("alpha", alpha.to_string());
            flag("n", n.to_string());
            vec!["weights"]
        }
    };
    let mut out: Vec<String> = command.into_iter().map(String::from).collect();
    out.extend(args);
    out.extend(tail);
    match config.verbosity {
        0 => out.push("--quiet".into()),
        1 => {}
        v => out.push(format!("-{}", "v".repeat(usize::from(v - 1)))),
    }
    out
}

/// `value` with `digits` significant digits in positional notation.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return value.to_string();
    }
    let exponent = value.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exponent).max(0) as usize;
    format!("{value:.decimals$}")
}

/// Summary written by `solve`.
#[derive(Debug, Clone, Serialize)]
struct SolveSummary<'a> {
    config: &'a RunConfig,
    l2_norm: f64,
    fp_iters_max: usize,
    max_constraint_residual: Option<f64>,
    wall_s: f64,
    /// Geometric anchors and values of the final scalar unknowns.
    u: Vec<[f64; 3]>,
    flux: Option<&'a [f64]>,
}

fn write_output(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Executes a resolved command; returns the process exit code.
pub fn dispatch(config: &CliConfig, stdout: &mut dyn Write) -> i32 {
    match execute(&config.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn execute(command: &Command, stdout: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Weights { alpha, n } => {
            let w = cq::weights(*alpha, *n, 1.0)?;
            let mut text = String::from("j,b_j,partial_sum\n");
            for (j, (b, s)) in w.as_slice().iter().zip(w.partial_sums()).enumerate() {
                text.push_str(&format!("{j},{b:?},{s:?}\n"));
            }
            stdout.write_all(text.as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::OracleMl { alpha, x } => {
            let v = oracle::mittag_leffler_neg(*alpha, *x)?;
            writeln!(stdout, "{}", format_significant(v, 8))?;
            Ok(EXIT_OK)
        }
        Command::TemporalStudy { alpha, lambda, final_time, ladder, out, format } => {
            let report = harness::run_temporal_study(*alpha, *lambda, *final_time, ladder)?;
            write_output(out, &harness::render(&report, *format)?, stdout)?;
            Ok(if report.metadata.complete { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Study { plan, out, format } => {
            let report = harness::run_study(plan)?;
            write_output(out, &harness::render(&report, *format)?, stdout)?;
            if let Some(path) = out {
                let mut name = path.as_os_str().to_owned();
                name.push(".manifest.json");
                harness::write_manifest(plan, Path::new(&name))?;
            }
            Ok(if report.metadata.complete { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Solve { run, out, format } => {
            let outcome = stepper::solve(run)?;
            let u = fespace::FeFunction::new(&outcome.mesh, &outcome.system, &outcome.u);
            let l2_norm = crate::sparse::dot(&outcome.u, &outcome.system.mass.mul_vec(&outcome.u)).sqrt();
            let anchors = &outcome.system.descriptor.u_anchors;
            let values: Vec<[f64; 3]> = anchors.iter().zip(u.coeffs).map(|(p, v)| [p[0], p[1], *v]).collect();
            let text = match format {
                Format::Json => {
                    let summary = SolveSummary {
                        config: run,
                        l2_norm,
                        fp_iters_max: outcome.fp_iters_max,
                        max_constraint_residual: outcome.max_constraint_residual,
                        wall_s: outcome.wall_seconds,
                        u: values,
                        flux: outcome.flux.as_deref(),
                    };
                    serde_json::to_string_pretty(&summary)? + "\n"
                }
                Format::Csv => {
                    let mut t = String::from("x,y,u\n");
                    for [x, y, v] in values {
                        t.push_str(&format!("{x},{y},{v}\n"));
                    }
                    t
                }
                Format::Markdown => format!(
                    "| fem | case | alpha | M | N | L2 norm | fp iters | wall s |\n|---|---|---|---|---|---|---|---|\n| {} | {} | {} | {} | {} | {:.6e} | {} | {:.3} |\n",
                    run.space, run.case, run.alpha, run.mesh, run.steps, l2_norm, outcome.fp_iters_max, outcome.wall_seconds
                ),
            };
            write_output(out, &text, stdout)?;
            Ok(EXIT_OK)
        }
    }
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => log::LevelFilter::Error,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Runs one command line and returns its exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse(argv) {
        Ok(config) => {
            init_logging(config.verbosity);
            dispatch(&config, stdout)
        }
        Err(ParseOutcome::Help(text)) => {
            let _ = stdout.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(ParseOutcome::Usage(text)) => {
            eprintln!("{}", text.trim_end());
            EXIT_USAGE
        }
    }
}
