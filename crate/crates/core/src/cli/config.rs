//! TOML run configuration. Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::eigencase::EigencaseSetup;
use crate::evolution::{Horizon, SolverParams};
use crate::functions::{auto_gauge_lambda, gauge_shift, CoefficientFn, ProblemSpec, SpatialFn};
use crate::validation::ValidationSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    GlobalPicard,
    Stationary,
    Eigencase,
    Validate,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::GlobalPicard => "global_picard",
            Mode::Stationary => "stationary",
            Mode::Eigencase => "eigencase",
            Mode::Validate => "validate",
        }
    }
}

/// `"auto"` or an explicit rate `λ ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GaugeValue {
    Rate(f64),
    Named(String),
}

/// `"running"`, `"final"` (fixed at the final time) or a fixed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HorizonValue {
    Time(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalPicardBlock {
    #[serde(default = "running")]
    pub horizon: HorizonValue,
}

fn running() -> HorizonValue {
    HorizonValue::Named("running".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FromRun {
    pub from_run: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaInfSource {
    FromRun(FromRun),
    Field(SpatialFn),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryBlock {
    #[serde(default = "default_scan_n")]
    pub scan_n: usize,
    #[serde(default = "default_root_tol")]
    pub root_tol: f64,
    pub beta_inf: BetaInfSource,
}

pub const MIN_SCAN_N: usize = 8;

fn default_scan_n() -> usize {
    64
}

fn default_root_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigencaseBlock {
    /// `f = rho·g`
    pub rho: f64,
    #[serde(default = "default_dt_ode")]
    pub dt_ode: f64,
    #[serde(default)]
    pub start_at_equilibrium: bool,
    #[serde(default = "default_mu_tol")]
    pub mu_tol: f64,
}

fn default_dt_ode() -> f64 {
    1e-3
}

fn default_mu_tol() -> f64 {
    1e-13
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    /// Write a field CSV for every snapshot.
    #[serde(default = "yes")]
    pub snapshots: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: None, snapshots: true }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub gauge: Option<GaugeValue>,
    pub problem: Option<ProblemSpec>,
    pub solver: Option<SolverParams>,
    pub global_picard: Option<GlobalPicardBlock>,
    pub stationary: Option<StationaryBlock>,
    pub eigencase: Option<EigencaseBlock>,
    pub validate: Option<ValidationSettings>,
    #[serde(default)]
    pub output: OutputBlock,
    /// Directory of the config file; relative paths inside resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// The mode a subcommand runs in: `solve` also accepts `global_picard`.
    pub fn resolve_mode(&self, command: Mode) -> Result<Mode, CliError> {
        match (command, self.mode) {
            (_, None) => Ok(command),
            (Mode::Solve, Some(Mode::GlobalPicard)) => Ok(Mode::GlobalPicard),
            (c, Some(m)) if c == m => Ok(c),
            (c, Some(m)) => Err(config_error(format!(
                "config declares mode = \"{}\" but the {} command was invoked",
                m.as_str(),
                c.as_str()
            ))),
        }
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn problem(&self) -> Result<&ProblemSpec, CliError> {
        let p = self.problem.as_ref().ok_or_else(|| config_error("missing [problem] section"))?;
        p.validate().map_err(|e| config_error(format!("[problem]: {e}")))?;
        Ok(p)
    }

    /// Problem after the optional gauge shift, and the rate used.
    pub fn shifted_problem(&self) -> Result<(ProblemSpec, f64), CliError> {
        let spec = self.problem()?;
        let rate = match &self.gauge {
            None => 0.0,
            Some(GaugeValue::Rate(r)) => *r,
            Some(GaugeValue::Named(s)) if s == "auto" => auto_gauge_lambda(&spec.beta),
            Some(GaugeValue::Named(s)) => {
                return Err(config_error(format!("gauge must be \"auto\" or a number, got \"{s}\"")))
            }
        };
        let shifted = gauge_shift(spec, rate).map_err(|e| config_error(e.to_string()))?;
        Ok((shifted, rate))
    }

    pub fn solver(&self, final_time: f64) -> Result<SolverParams, CliError> {
        let mut p = self.solver.clone().ok_or_else(|| config_error("missing [solver] section"))?;
        p.t_end = final_time;
        p.validate().map_err(|e| config_error(format!("[solver]: {e}")))?;
        Ok(p)
    }

    pub fn horizon(&self, final_time: f64) -> Result<Horizon, CliError> {
        let value = self.global_picard.as_ref().map(|b| b.horizon.clone()).unwrap_or_else(running);
        match value {
            HorizonValue::Named(s) if s == "running" => Ok(Horizon::Running),
            HorizonValue::Named(s) if s == "final" => Ok(Horizon::Fixed(final_time)),
            HorizonValue::Time(t) if t > 0.0 && t <= final_time => Ok(Horizon::Fixed(t)),
            HorizonValue::Time(t) => Err(config_error(format!("horizon {t} outside (0, {final_time}]"))),
            HorizonValue::Named(s) => {
                Err(config_error(format!("horizon must be \"running\", \"final\" or a time, got \"{s}\"")))
            }
        }
    }

    pub fn stationary(&self) -> Result<&StationaryBlock, CliError> {
        let b = self.stationary.as_ref().ok_or_else(|| config_error("missing [stationary] section"))?;
        if b.scan_n < MIN_SCAN_N {
            return Err(config_error(format!("[stationary] scan_n must be at least {MIN_SCAN_N}, got {}", b.scan_n)));
        }
        if !(b.root_tol > 0.0) {
            return Err(config_error(format!("[stationary] root_tol must be positive, got {}", b.root_tol)));
        }
        Ok(b)
    }

    pub fn eigencase(&self) -> Result<EigencaseSetup, CliError> {
        let spec = self.problem()?;
        let b = self.eigencase.as_ref().ok_or_else(|| config_error("missing [eigencase] section"))?;
        if spec.grid.n_cells.len() != 1 {
            return Err(config_error("eigencase runs on a 1D grid"));
        }
        let CoefficientFn::Constant { c: beta } = spec.beta else {
            return Err(config_error("eigencase needs a constant beta"));
        };
        if !(beta > 0.0) {
            return Err(config_error(format!("eigencase needs beta > 0, got {beta}")));
        }
        if spec.alpha.is_time_dependent() {
            return Err(config_error("eigencase needs a time-independent alpha"));
        }
        if !(b.rho > 0.0) {
            return Err(config_error(format!("[eigencase] rho must be positive, got {}", b.rho)));
        }
        if !(b.dt_ode > 0.0 && b.mu_tol > 0.0) {
            return Err(config_error("[eigencase] dt_ode and mu_tol must be positive"));
        }
        Ok(EigencaseSetup {
            grid: spec.grid.clone(),
            alpha: spec.alpha.clone(),
            beta,
            rho: b.rho,
            u0: spec.u0.clone(),
            final_time: spec.final_time,
            start_at_equilibrium: b.start_at_equilibrium,
            dt_ode: b.dt_ode,
            mu_tol: b.mu_tol,
        })
    }

    pub fn validation(&self, seed: Option<u64>) -> Result<ValidationSettings, CliError> {
        let mut s = self.validate.unwrap_or_default();
        if let Some(seed) = seed {
            s.seed = seed;
        }
        if !(s.dt > 0.0 && s.dt <= 1e-2) {
            return Err(config_error(format!("[validate] dt must be in (0, 1e-2], got {}", s.dt)));
        }
        Ok(s)
    }

    pub fn output_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        match (cli_out, &self.output.dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(d)) => self.resolve_path(d),
            (None, None) => PathBuf::from("out"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLVE: &str = r#"
mode = "solve"

[problem]
final_time = 0.1
grid = { extents = [[0.0, 1.0]], n_cells = [16] }
alpha = { kind = "constant", c = 1.0 }
beta = { kind = "constant", c = 1.0 }
u0 = { kind = "sine_mode", amplitude = 1.0 }

[solver]
dt = 0.01
"#;

    #[test]
    fn parses_minimal_solve_config() {
        let cfg = RunConfig::parse(SOLVE).unwrap();
        assert_eq!(cfg.resolve_mode(Mode::Solve).unwrap(), Mode::Solve);
        let spec = cfg.problem().unwrap();
        let p = cfg.solver(spec.final_time).unwrap();
        assert_eq!(p.t_end, 0.1);
        assert_eq!(p.picard_tol, 1e-10);
        assert!(cfg.output.snapshots);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SOLVE.replace("dt = 0.01", "dt = 0.01\npicard_tolerance = 1e-9");
        assert!(matches!(RunConfig::parse(&bad), Err(CliError::Config(_))));
        let bad = SOLVE.replace("mode = \"solve\"", "mode = \"solve\"\nverbose = true");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn mode_must_match_command() {
        let cfg = RunConfig::parse(SOLVE).unwrap();
        assert!(cfg.resolve_mode(Mode::Stationary).is_err());
        let gp = RunConfig::parse(&SOLVE.replace("\"solve\"", "\"global_picard\"")).unwrap();
        assert_eq!(gp.resolve_mode(Mode::Solve).unwrap(), Mode::GlobalPicard);
    }

    #[test]
    fn horizon_values() {
        let mut cfg = RunConfig::parse(SOLVE).unwrap();
        assert_eq!(cfg.horizon(1.0).unwrap(), Horizon::Running);
        cfg.global_picard = Some(GlobalPicardBlock { horizon: HorizonValue::Time(0.5) });
        assert_eq!(cfg.horizon(1.0).unwrap(), Horizon::Fixed(0.5));
        cfg.global_picard = Some(GlobalPicardBlock { horizon: HorizonValue::Named("final".into()) });
        assert_eq!(cfg.horizon(1.0).unwrap(), Horizon::Fixed(1.0));
        cfg.global_picard = Some(GlobalPicardBlock { horizon: HorizonValue::Time(2.0) });
        assert!(cfg.horizon(1.0).is_err());
    }

    #[test]
    fn stationary_block_enforces_scan_minimum() {
        let text = format!(
            "{SOLVE}\n[stationary]\nscan_n = 1\nbeta_inf = {{ kind = \"constant\", value = 1.0 }}\n"
        );
        let cfg = RunConfig::parse(&text).unwrap();
        assert!(cfg.stationary().is_err());
        let from_run = format!("{SOLVE}\n[stationary]\nbeta_inf = {{ from_run = \"run1\" }}\n");
        let cfg = RunConfig::parse(&from_run).unwrap();
        assert!(matches!(cfg.stationary().unwrap().beta_inf, BetaInfSource::FromRun(_)));
    }

    #[test]
    fn gauge_auto_lifts_beta() {
        let text = SOLVE
            .replace("mode = \"solve\"", "mode = \"solve\"\ngauge = \"auto\"")
            .replace("beta = { kind = \"constant\", c = 1.0 }", "beta = { kind = \"constant\", c = -2.0 }");
        let cfg = RunConfig::parse(&text).unwrap();
        let (spec, rate) = cfg.shifted_problem().unwrap();
        assert_eq!(rate, 3.0);
        assert_eq!(spec.beta, CoefficientFn::Constant { c: 1.0 });
    }
}
