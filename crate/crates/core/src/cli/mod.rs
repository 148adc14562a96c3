//! Command line front end: `nonlocal solve|stationary|eigencase|validate`.
//!
//! Exit codes: 0 success, 1 failed validation or I/O error, 2 bad
//! configuration, 3 solver divergence, 4 no stationary root bracketed,
//! 5 eigencase monotonicity verdict violated.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::eigencase::run_eigencase;
use crate::error::Error;
use crate::evolution::{Evolution, Trajectory};
use crate::grid::{sample, ScalarField};
use crate::stationary::{beta_limit_estimate, StationaryProblem};
use crate::validation::run_all;
use config::{BetaInfSource, Mode, RunConfig};
use output::{num, read_field, snapshot_name, write_field, write_json, write_rows, write_trajectory};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(e) => match e {
                Error::NoSignChange { .. } => 4,
                Error::CgNotConverged(_)
                | Error::NonPositiveDiagonal { .. }
                | Error::InvalidOperator { .. }
                | Error::NonPositiveDiffusion { .. }
                | Error::PicardDiverged { .. }
                | Error::OuterDiverged { .. } => 3,
                _ => 2,
            },
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nonlocal", version, about = "Parabolic problems with nonlocal diffusion and memory reaction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// March the evolution problem (or iterate whole trajectories when
    /// mode = "global_picard")
    Solve(RunArgs),
    /// Find the stationary solutions through the scalar fixed-point equation
    Stationary(RunArgs),
    /// Eigenfunction case: PDE against the scalar ODE
    Eigencase(RunArgs),
    /// Run the acceptance suite
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output] dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (used by validate)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Solve(a) => load(&a.config).and_then(|cfg| cmd_solve(&cfg, a.out.as_deref())),
        Command::Stationary(a) => load(&a.config).and_then(|cfg| cmd_stationary(&cfg, a.out.as_deref())),
        Command::Eigencase(a) => load(&a.config).and_then(|cfg| cmd_eigencase(&cfg, a.out.as_deref())),
        Command::Validate(a) => {
            let cfg = match &a.config {
                Some(p) => load(p),
                None => RunConfig::parse(""),
            };
            cfg.and_then(|cfg| cmd_validate(&cfg, a.out.as_deref(), a.seed))
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    RunConfig::load(path)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    mode: &'static str,
    final_time: f64,
    dt: f64,
    steps: usize,
    gauge_lambda: f64,
    k_bound: f64,
    max_linf: f64,
    max_linf_within_k_bound: bool,
    beta_lower_bound: f64,
    min_value: f64,
    max_energy_residual: f64,
    max_picard_iters: usize,
    total_picard_iters: usize,
    beta_limit_converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    outer_sweeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outer_residuals: Option<Vec<f64>>,
}

fn write_snapshots(dir: &Path, traj: &Trajectory) -> Result<(), CliError> {
    for (t, u) in &traj.snapshots {
        write_field(&dir.join(snapshot_name(*t)), u, "u")?;
    }
    Ok(())
}

/// `solve` (and `global_picard`): writes trajectory.csv, snapshot fields,
/// memory_final.csv and summary.json.
pub fn cmd_solve(cfg: &RunConfig, out: Option<&Path>) -> Result<i32, CliError> {
    let mode = cfg.resolve_mode(Mode::Solve)?;
    let (spec, gauge_lambda) = cfg.shifted_problem()?;
    let params = cfg.solver(spec.final_time)?;
    let horizon = if mode == Mode::GlobalPicard { Some(cfg.horizon(spec.final_time)?) } else { None };
    let evolution = Evolution::new(&spec).map_err(|e| CliError::Config(e.to_string()))?;
    let dir = cfg.output_dir(out);
    create_dir(&dir)?;

    let start = Instant::now();
    let (traj, outer) = match horizon {
        None => (evolution.run(&params)?, None),
        Some(h) => {
            let (traj, sweeps, residuals) = evolution.run_global_picard(&params, h)?;
            (traj, Some((sweeps, residuals)))
        }
    };
    let elapsed = start.elapsed();

    write_trajectory(&dir.join("trajectory.csv"), &traj)?;
    if cfg.output.snapshots {
        write_snapshots(&dir, &traj)?;
    }
    write_field(&dir.join("memory_final.csv"), &traj.final_state.memory, "memory")?;
    let (_, beta_limit_converged) = beta_limit_estimate(&traj, &spec)?;
    let (steps, dt) = params.schedule();
    let summary = SolveSummary {
        mode: mode.as_str(),
        final_time: spec.final_time,
        dt,
        steps,
        gauge_lambda,
        k_bound: traj.k_bound,
        max_linf: traj.max_linf(),
        max_linf_within_k_bound: traj.max_linf() <= traj.k_bound + 1e-8,
        beta_lower_bound: spec.beta.bounds().0,
        min_value: traj.min_value(),
        max_energy_residual: traj.energy_residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_picard_iters: traj.picard_iters.iter().copied().max().unwrap_or(0),
        total_picard_iters: traj.picard_iters.iter().sum(),
        beta_limit_converged,
        outer_sweeps: outer.as_ref().map(|o| o.0),
        outer_residuals: outer.map(|o| o.1),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "{}: {steps} steps to t = {}, max |u| = {}, K = {}, wall time {:.3} s",
        mode.as_str(),
        spec.final_time,
        num(summary.max_linf),
        num(summary.k_bound),
        elapsed.as_secs_f64()
    );
    println!("outputs in {}", dir.display());
    Ok(0)
}

#[derive(Debug, Serialize)]
struct RootRecord {
    mu: f64,
    residual: f64,
    ell: f64,
    bracket: [f64; 2],
    field: String,
}

#[derive(Debug, Serialize)]
struct RootsFile {
    alpha_bounds: [f64; 2],
    scan_n: usize,
    root_tol: f64,
    /// Roots are complete only up to the scan resolution.
    scan_spacing: f64,
    beta_inf_converged: Option<bool>,
    roots: Vec<RootRecord>,
}

fn write_scan(path: &Path, scan: &[(f64, f64)]) -> Result<(), CliError> {
    write_rows(path, &["mu", "phi", "phi_minus_mu"], scan.iter().map(|&(mu, phi)| vec![mu, phi, phi - mu]))
}

#[derive(Debug, serde::Deserialize)]
struct PriorSummary {
    beta_limit_converged: bool,
}

fn beta_inf_field(cfg: &RunConfig, source: &BetaInfSource) -> Result<(ScalarField, Option<bool>), CliError> {
    let spec = cfg.problem()?;
    let grid = spec.grid.build()?;
    match source {
        BetaInfSource::Field(d) => {
            d.validate(grid.dim()).map_err(|e| CliError::Config(format!("beta_inf: {e}")))?;
            Ok((sample(d, &grid).map_err(|e| CliError::Config(format!("beta_inf: {e}")))?, None))
        }
        BetaInfSource::FromRun(r) => {
            let run_dir = cfg.resolve_path(&r.from_run);
            let memory = read_field(&run_dir.join("memory_final.csv"), &grid)?;
            let converged = std::fs::read_to_string(run_dir.join("summary.json"))
                .ok()
                .and_then(|s| serde_json::from_str::<PriorSummary>(&s).ok())
                .map(|s| s.beta_limit_converged);
            if converged != Some(true) {
                log::warn!("memory of {} is not known to have converged; beta_inf is an estimate", run_dir.display());
            }
            let values = memory
                .iter()
                .map(|&m| spec.beta.eval(m, Some(spec.final_time)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok((ScalarField::new(grid, values)?, converged))
        }
    }
}

/// The stationary problem described by `[problem]` and `[stationary]`, with
/// `f` frozen at the final time. The flag tells whether a `from_run` memory
/// was marked converged.
pub fn stationary_problem(cfg: &RunConfig) -> Result<(StationaryProblem, Option<bool>), CliError> {
    let spec = cfg.problem()?;
    let block = cfg.stationary()?;
    let (beta_inf, converged) = beta_inf_field(cfg, &block.beta_inf)?;
    let grid = beta_inf.grid().clone();
    let as_config = |e: Error| CliError::Config(e.to_string());
    let f = sample(&spec.f.space, &grid).map_err(as_config)?.scaled(spec.f.time.eval(spec.final_time));
    let g = sample(&spec.g, &grid).map_err(as_config)?;
    let mut prob = StationaryProblem::new(beta_inf, f, g, spec.alpha.clone()).map_err(as_config)?;
    if let Some(s) = &cfg.solver {
        prob = prob.with_cg(s.cg_tol, s.cg_max);
    }
    Ok((prob, converged))
}

/// `stationary`: writes scan.csv, roots.json and one field per root.
pub fn cmd_stationary(cfg: &RunConfig, out: Option<&Path>) -> Result<i32, CliError> {
    cfg.resolve_mode(Mode::Stationary)?;
    let spec = cfg.problem()?;
    let block = cfg.stationary()?;
    let (prob, converged) = stationary_problem(cfg)?;
    let dir = cfg.output_dir(out);
    create_dir(&dir)?;

    let found = match prob.find_fixed_points(block.scan_n, block.root_tol) {
        Err(Error::NoSignChange { reason, scan }) => {
            write_scan(&dir.join("scan.csv"), &scan)?;
            return Err(Error::NoSignChange { reason, scan }.into());
        }
        r => r?,
    };
    write_scan(&dir.join("scan.csv"), &found.scan_values)?;
    let mut roots = Vec::new();
    for (i, root) in found.roots.iter().enumerate() {
        let name = format!("u_root{i}.csv");
        write_field(&dir.join(&name), &root.u_mu, "u")?;
        roots.push(RootRecord {
            mu: root.mu,
            residual: root.residual,
            ell: prob.ell(&root.u_mu),
            bracket: [root.bracket.0, root.bracket.1],
            field: name,
        });
    }
    let (a0, a1) = spec.alpha.bounds();
    let file = RootsFile {
        alpha_bounds: [a0, a1],
        scan_n: block.scan_n,
        root_tol: block.root_tol,
        scan_spacing: found.scan_values[1].0 - found.scan_values[0].0,
        beta_inf_converged: converged,
        roots,
    };
    write_json(&dir.join("roots.json"), &file)?;
    for r in &file.roots {
        println!("root mu = {}  residual = {:e}  ell = {}", num(r.mu), r.residual, num(r.ell));
    }
    println!("outputs in {}", dir.display());
    Ok(0)
}

#[derive(Debug, Serialize)]
struct MuInfinityFile {
    mu_infinity: f64,
    residual: f64,
    sign_changes: usize,
    eigen_lambda: f64,
    fg: f64,
    ell0: f64,
    final_ell: f64,
    max_abs_diff: f64,
    verdict: &'static str,
    monotonicity_violation: f64,
    monotonicity_tolerance: f64,
    verdict_holds: bool,
}

/// `eigencase`: writes compare.csv, mu_infinity.json and trajectory.csv.
/// Exit 5 when the monotonicity verdict is violated.
pub fn cmd_eigencase(cfg: &RunConfig, out: Option<&Path>) -> Result<i32, CliError> {
    cfg.resolve_mode(Mode::Eigencase)?;
    let setup = cfg.eigencase()?;
    let params = cfg.solver(setup.final_time)?;
    let dir = cfg.output_dir(out);
    create_dir(&dir)?;

    let out = run_eigencase(&setup, &params)?;
    let rows = out.times.iter().zip(&out.ell_pde).zip(&out.ell_ode).map(|((t, p), o)| vec![*t, *p, *o, (p - o).abs()]);
    write_rows(&dir.join("compare.csv"), &["t", "ell_pde", "ell_ode", "abs_diff"], rows)?;
    write_trajectory(&dir.join("trajectory.csv"), &out.trajectory)?;
    let file = MuInfinityFile {
        mu_infinity: out.mu_infinity.mu,
        residual: out.mu_infinity.residual,
        sign_changes: out.mu_infinity.sign_changes,
        eigen_lambda: out.eigen_lambda,
        fg: out.fg,
        ell0: out.ell0,
        final_ell: *out.ell_pde.last().unwrap(),
        max_abs_diff: out.max_ode_discrepancy(),
        verdict: out.verdict.as_str(),
        monotonicity_violation: out.monotonicity_violation,
        monotonicity_tolerance: out.monotonicity_tolerance(),
        verdict_holds: out.verdict_holds(),
    };
    write_json(&dir.join("mu_infinity.json"), &file)?;
    println!(
        "mu_inf = {}  ell(T) = {}  max |ell_pde - ell_ode| = {:e}  verdict: {}",
        num(file.mu_infinity),
        num(file.final_ell),
        file.max_abs_diff,
        file.verdict
    );
    println!("outputs in {}", dir.display());
    if !file.verdict_holds {
        eprintln!(
            "error: ell is not {} (violation {:e} > {:e})",
            file.verdict, file.monotonicity_violation, file.monotonicity_tolerance
        );
        return Ok(5);
    }
    Ok(0)
}

/// `validate`: runs the acceptance suite and writes validate_report.json.
pub fn cmd_validate(cfg: &RunConfig, out: Option<&Path>, seed: Option<u64>) -> Result<i32, CliError> {
    cfg.resolve_mode(Mode::Validate)?;
    let settings = cfg.validation(seed)?;
    let dir = cfg.output_dir(out);
    create_dir(&dir)?;
    let start = Instant::now();
    let report = run_all(&settings);
    write_json(&dir.join("validate_report.json"), &report)?;
    for c in &report.checks {
        println!("{:<4} {}  {}", c.id, if c.passed { "PASS" } else { "FAIL" }, c.name);
        if !c.passed {
            println!("       {}", c.detail);
        }
    }
    println!(
        "{} of {} checks passed in {:.1} s",
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(if report.passed { 0 } else { 1 })
}
