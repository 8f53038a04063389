//! The `varfrac` command line.
//!
//! Exit codes: 0 success, 2 bad input (arguments, config, expressions, files),
//! 3 an identity check above threshold, 4 solver did not converge, 5 a
//! residual above threshold.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{to_json, Problem, ProblemConfig};
use crate::dsl::{self, Expr};
use crate::grid::{Grid, SampledFunction};
use crate::noether::{invariance_residual, noether_residual, ResidualSummary};
use crate::operators::ibp::{self, IbpReport};
use crate::operators::{Family, OperatorKind, Side};
use crate::variational::{el_residual, evaluate_functional, interior_max, partials_along, solve_direct};
use crate::varorder::OrderFunction;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IDENTITY: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_RESIDUAL: i32 = 5;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "VARFRAC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "varfrac", version, about = "Variable-order fractional calculus of variations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply one operator to f(t) and write t,value CSV.
    OpEval {
        config: PathBuf,
        #[arg(long, value_enum)]
        op: OpName,
        /// Expression in t.
        #[arg(long)]
        f: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare both sides of an integration-by-parts identity.
    CheckIbp {
        config: PathBuf,
        #[arg(long, value_enum)]
        which: IbpWhich,
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize the action; writes solution.csv, el_residual.csv and
    /// solve_report.json into the output directory.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invariance and Noether residuals along a solution CSV; writes
    /// invariance_residual.csv, noether_residual.csv and noether_report.json.
    CheckNoether {
        config: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OpName {
    /// Left RL integral.
    Li,
    /// Right RL integral.
    Ri,
    /// Left RL derivative.
    Ld,
    /// Right RL derivative.
    Rd,
    /// Left Caputo derivative.
    Lc,
    /// Right Caputo derivative.
    Rc,
}

impl OpName {
    fn side_family(self) -> (Side, Family) {
        match self {
            OpName::Li => (Side::Left, Family::RlIntegral),
            OpName::Ri => (Side::Right, Family::RlIntegral),
            OpName::Ld => (Side::Left, Family::RlDerivative),
            OpName::Rd => (Side::Right, Family::RlDerivative),
            OpName::Lc => (Side::Left, Family::Caputo),
            OpName::Rc => (Side::Right, Family::Caputo),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IbpWhich {
    Integrals,
    Derivatives,
}

/// A failed command: exit code and a one-line message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_INPUT, message: format!("error: {message}") }
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` (program name first) and runs the command; returns the exit
/// code after printing reports to stdout and failures to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(message) = configure_threads() {
        eprintln!("varfrac: error: {message}");
        return EXIT_INPUT;
    }
    match run(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("varfrac: {}", f.message);
            f.code
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    // A pool already exists when called twice in one process; keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(command: &Command) -> Outcome {
    match command {
        Command::OpEval { config, op, f, out } => op_eval(config, *op, f, out),
        Command::CheckIbp { config, which, f, g, out } => check_ibp(config, *which, f, g, out.as_deref()),
        Command::Solve { config, out } => solve(config, out),
        Command::CheckNoether { config, solution, out } => check_noether(config, solution, out),
    }
}

fn load(path: &Path) -> Result<Problem, Failure> {
    ProblemConfig::from_path(path).and_then(|c| c.build()).map_err(Failure::input)
}

/// `f` sampled on the grid together with its symbolic derivative.
fn sample_with_derivative(src: &str, name: &str, grid: &Grid) -> Result<(SampledFunction, SampledFunction), Failure> {
    let expr = dsl::parse(src, &["t"]).map_err(|e| Failure::input(format!("--{name}: {e}")))?;
    let deriv = expr.differentiate("t").map_err(Failure::input)?;
    Ok((sample(&expr, name, grid)?, sample(&deriv, name, grid)?))
}

fn sample(expr: &Expr, name: &str, grid: &Grid) -> Result<SampledFunction, Failure> {
    let values = grid
        .nodes()
        .iter()
        .map(|&t| expr.eval(&[t]).map_err(|e| Failure::input(format!("--{name} at t = {t}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    SampledFunction::new(grid.clone(), values).map_err(Failure::input)
}

/// The first order on `side`, or the first on the other side.
fn pick_order(p: &Problem, side: Side) -> Result<OrderFunction, Failure> {
    let (first, second) = match side {
        Side::Left => (&p.problem.alphas, &p.problem.betas),
        Side::Right => (&p.problem.betas, &p.problem.alphas),
    };
    first.first().or(second.first()).cloned().ok_or_else(|| Failure::input("config declares no orders"))
}

fn write_csv(f: &SampledFunction, path: &Path) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    }
    let file = File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    f.write_csv(BufWriter::new(file)).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_text(text: &str, path: &Path) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn op_eval(config: &Path, op: OpName, f: &str, out: &Path) -> Outcome {
    let p = load(config)?;
    let (side, family) = op.side_family();
    let (fs, fp) = sample_with_derivative(f, "f", &p.grid)?;
    let kind = OperatorKind::new(side, family, pick_order(&p, side)?);
    let result = kind.apply(&fs, Some(&fp)).map_err(Failure::input)?;
    write_csv(&result, out)
}

#[derive(Debug, Serialize)]
struct IbpOutput {
    lhs: f64,
    rhs: f64,
    abs_diff: f64,
    rel_diff: f64,
    #[serde(rename = "N")]
    intervals: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mirror: Option<Box<IbpOutput>>,
}

impl From<IbpReport> for IbpOutput {
    fn from(r: IbpReport) -> Self {
        Self {
            lhs: r.lhs,
            rhs: r.rhs,
            abs_diff: (r.lhs - r.rhs).abs(),
            rel_diff: r.relative_discrepancy,
            intervals: r.intervals,
            mirror: None,
        }
    }
}

fn check_ibp(config: &Path, which: IbpWhich, f: &str, g: &str, out: Option<&Path>) -> Outcome {
    let p = load(config)?;
    let order = pick_order(&p, Side::Left)?;
    let (fs, fp) = sample_with_derivative(f, "f", &p.grid)?;
    let (gs, _) = sample_with_derivative(g, "g", &p.grid)?;
    let report: IbpOutput = match which {
        IbpWhich::Integrals => ibp::integrals(&fs, &gs, &order).map_err(Failure::input)?.into(),
        IbpWhich::Derivatives => {
            let mut left: IbpOutput = ibp::derivatives_left(&fs, &fp, &gs, &order).map_err(Failure::input)?.into();
            let right = ibp::derivatives_right(&fs, &fp, &gs, &order).map_err(Failure::input)?;
            left.mirror = Some(Box::new(right.into()));
            left
        }
    };
    let json = to_json(&report);
    println!("{json}");
    if let Some(path) = out {
        write_text(&format!("{json}\n"), path)?;
    }
    let worst = report.rel_diff.max(report.mirror.as_ref().map_or(0.0, |m| m.rel_diff));
    if worst > p.thresholds.ibp {
        return Err(Failure {
            code: EXIT_IDENTITY,
            message: format!("identity check failed: relative discrepancy {worst:e} > {:e}", p.thresholds.ibp),
        });
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveOutput {
    #[serde(rename = "J")]
    functional: f64,
    #[serde(rename = "J_initial")]
    initial_functional: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    stalled: bool,
    el_residual_max_interior: f64,
    #[serde(rename = "N")]
    intervals: usize,
}

fn solve(config: &Path, out: &Path) -> Outcome {
    let p = load(config)?;
    let sol = solve_direct(&p.problem, p.grid.intervals(), &p.solver).map_err(|e| match e {
        crate::variational::VariationalError::Diverged { .. } => {
            Failure { code: EXIT_NOT_CONVERGED, message: format!("solver diverged: {e}") }
        }
        other => Failure::input(other),
    })?;
    let residual = el_residual(&p.problem, &sol.q).map_err(Failure::input)?;
    let r = &sol.report;
    let report = SolveOutput {
        functional: r.functional,
        initial_functional: r.initial_functional,
        grad_norm: r.grad_norm,
        iterations: r.iterations,
        converged: r.converged,
        stalled: r.stalled,
        el_residual_max_interior: interior_max(&residual),
        intervals: r.intervals,
    };
    let json = to_json(&report);
    write_csv(&sol.q, &out.join("solution.csv"))?;
    write_csv(&residual, &out.join("el_residual.csv"))?;
    write_text(&format!("{json}\n"), &out.join("solve_report.json"))?;
    println!("{json}");
    if !r.converged {
        return Err(Failure {
            code: EXIT_NOT_CONVERGED,
            message: format!(
                "solver stopped after {} iterations with gradient norm {:e} > tol {:e}",
                r.iterations, r.grad_norm, p.solver.tol
            ),
        });
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct NoetherOutput {
    invariance_max: f64,
    noether_max_interior: f64,
    noether: ResidualSummary,
    partials_max: f64,
    noether_threshold: f64,
    invariance_threshold: f64,
    #[serde(rename = "J")]
    functional: f64,
}

fn check_noether(config: &Path, solution: &Path, out: &Path) -> Outcome {
    let p = load(config)?;
    let xi = p.symmetry.as_ref().ok_or_else(|| Failure::input("config has no symmetry.xi_expr"))?;
    let file = File::open(solution).map_err(|e| Failure::input(format!("{}: {e}", solution.display())))?;
    let q = SampledFunction::read_csv(file).map_err(|e| Failure::input(format!("{}: {e}", solution.display())))?;
    let inv = invariance_residual(&p.problem, &q, xi).map_err(Failure::input)?;
    let noe = noether_residual(&p.problem, &q, xi).map_err(Failure::input)?;
    let partials = partials_along(&p.problem, &q).map_err(Failure::input)?;
    let partials_max = partials.left.iter().chain(&partials.right).fold(0.0f64, |m, g| m.max(g.max_abs()));
    let summary = ResidualSummary::of(&noe);
    let report = NoetherOutput {
        invariance_max: inv.max_abs(),
        noether_max_interior: summary.interior_max_norm,
        noether: summary,
        partials_max,
        noether_threshold: p.thresholds.noether_relative * partials_max,
        invariance_threshold: p.thresholds.invariance,
        functional: evaluate_functional(&p.problem, &q).map_err(Failure::input)?,
    };
    let json = to_json(&report);
    write_csv(&inv, &out.join("invariance_residual.csv"))?;
    write_csv(&noe, &out.join("noether_residual.csv"))?;
    write_text(&format!("{json}\n"), &out.join("noether_report.json"))?;
    println!("{json}");
    if report.invariance_max > report.invariance_threshold || report.noether_max_interior > report.noether_threshold {
        return Err(Failure {
            code: EXIT_RESIDUAL,
            message: format!(
                "residual above threshold: invariance {:e} (limit {:e}), noether interior {:e} (limit {:e})",
                report.invariance_max,
                report.invariance_threshold,
                report.noether_max_interior,
                report.noether_threshold
            ),
        });
    }
    Ok(())
}
