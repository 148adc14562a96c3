//! Python bindings: grids and coefficient functions, plus config-driven
//! entry points for the evolution, stationary and eigencase solvers.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nonlocal_core::cli::config::RunConfig;
use nonlocal_core::cli::output::to_json_string;
use nonlocal_core::cli::{stationary_problem, CliError};
use nonlocal_core::eigencase::run_eigencase;
use nonlocal_core::evolution::Evolution;
use nonlocal_core::functions::SpatialFn;
use nonlocal_core::stationary::{self, solve_mu_infinity};
use nonlocal_core::validation::{run_all, ValidationSettings};
use nonlocal_core::{build_grid, integrate_product, CoefficientFn, Error, Grid, ScalarField};

fn core_err(e: Error) -> PyErr {
    match CliError::from(e) {
        c if c.exit_code() == 2 => PyValueError::new_err(c.to_string()),
        c => PyRuntimeError::new_err(c.to_string()),
    }
}

fn cli_err(e: CliError) -> PyErr {
    if e.exit_code() == 2 {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_config(text: &str) -> PyResult<RunConfig> {
    RunConfig::parse(text).map_err(cli_err)
}

/// Uniform grid of interior nodes on a box (1D or 2D).
#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: Arc<Grid>,
}

impl PyGrid {
    fn field(&self, values: Vec<f64>) -> PyResult<ScalarField> {
        ScalarField::new(self.inner.clone(), values).map_err(core_err)
    }
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(extents: Vec<(f64, f64)>, n_cells: Vec<usize>) -> PyResult<Self> {
        let grid = build_grid(extents.len(), &extents, &n_cells).map_err(core_err)?;
        Ok(PyGrid { inner: Arc::new(grid) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n_cells(&self) -> Vec<usize> {
        self.inner.n_cells().to_vec()
    }

    #[getter]
    fn spacing(&self) -> Vec<f64> {
        self.inner.spacing().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn coordinates(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.coordinates(i)).collect()
    }

    fn discrete_eigenvalue(&self, modes: Vec<u32>) -> f64 {
        self.inner.discrete_eigenvalue(&modes)
    }

    /// Samples a spatial descriptor given as JSON, e.g.
    /// `{"kind": "sine_mode", "amplitude": 1.0}`.
    fn sample(&self, descriptor: &str) -> PyResult<Vec<f64>> {
        let d: SpatialFn = serde_json::from_str(descriptor).map_err(|e| PyValueError::new_err(e.to_string()))?;
        d.validate(self.inner.dim()).map_err(core_err)?;
        Ok(nonlocal_core::sample(&d, &self.inner).map_err(core_err)?.into_values())
    }

    fn integrate_product(&self, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
        integrate_product(&self.field(a)?, &self.field(b)?).map_err(core_err)
    }

    fn __repr__(&self) -> String {
        format!("Grid(dim={}, n_cells={:?}, nodes={})", self.inner.dim(), self.inner.n_cells(), self.inner.len())
    }
}

/// Bounded coefficient function built from its JSON description, e.g.
/// `{"kind": "rational_bump", "a": 1.0, "b": 1.0}`.
#[pyclass(name = "Coefficient", frozen)]
struct PyCoefficient {
    inner: CoefficientFn,
}

#[pymethods]
impl PyCoefficient {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        let inner: CoefficientFn = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(core_err)?;
        Ok(PyCoefficient { inner })
    }

    #[pyo3(signature = (s, t=None))]
    fn eval(&self, s: f64, t: Option<f64>) -> PyResult<f64> {
        self.inner.eval(s, t).map_err(core_err)
    }

    fn bounds(&self) -> (f64, f64) {
        self.inner.bounds()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.name()
    }

    fn shifted(&self, shift: f64) -> Self {
        PyCoefficient { inner: self.inner.shifted(shift) }
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("coefficients serialize")
    }

    fn __repr__(&self) -> String {
        format!("Coefficient({})", self.to_json())
    }
}

/// Runs the evolution described by a TOML config string (`solve` or
/// `global_picard` mode) and returns the monitored series and final state.
#[pyfunction]
fn solve<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse_config(config)?;
    let mode = cfg.resolve_mode(nonlocal_core::cli::config::Mode::Solve).map_err(cli_err)?;
    let (spec, gauge_lambda) = cfg.shifted_problem().map_err(cli_err)?;
    let params = cfg.solver(spec.final_time).map_err(cli_err)?;
    let global = mode == nonlocal_core::cli::config::Mode::GlobalPicard;
    let horizon = cfg.horizon(spec.final_time).map_err(cli_err)?;
    let ev = Evolution::new(&spec).map_err(core_err)?;
    let (traj, outer) = py.detach(|| {
        if global {
            ev.run_global_picard(&params, horizon).map(|(t, _, r)| (t, Some(r)))
        } else {
            ev.run(&params).map(|t| (t, None))
        }
    })
    .map_err(core_err)?;
    let d = PyDict::new(py);
    d.set_item("times", traj.times.clone())?;
    d.set_item("ell", traj.ell_series.clone())?;
    d.set_item("l2", traj.l2_series.clone())?;
    d.set_item("linf", traj.linf_series.clone())?;
    d.set_item("min", traj.min_series.clone())?;
    d.set_item("picard_iters", traj.picard_iters.clone())?;
    d.set_item("energy_residuals", traj.energy_residuals.clone())?;
    d.set_item("k_bound", traj.k_bound)?;
    d.set_item("gauge_lambda", gauge_lambda)?;
    d.set_item("snapshot_times", traj.snapshots.iter().map(|(t, _)| *t).collect::<Vec<_>>())?;
    d.set_item("final_u", traj.final_state.u.values().to_vec())?;
    d.set_item("final_memory", traj.final_state.memory.values().to_vec())?;
    d.set_item("outer_residuals", outer)?;
    Ok(d)
}

/// Stationary roots for a TOML config string with a `[stationary]` section.
#[pyfunction]
fn find_fixed_points<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse_config(config)?;
    let block = cfg.stationary().map_err(cli_err)?.clone();
    let (prob, _) = stationary_problem(&cfg).map_err(cli_err)?;
    let found = py.detach(|| prob.find_fixed_points(block.scan_n, block.root_tol)).map_err(core_err)?;
    let roots = found
        .roots
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("mu", r.mu)?;
            d.set_item("residual", r.residual)?;
            d.set_item("ell", prob.ell(&r.u_mu))?;
            d.set_item("u", r.u_mu.values().to_vec())?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let d = PyDict::new(py);
    d.set_item("roots", roots)?;
    d.set_item("scan", found.scan_values)?;
    Ok(d)
}

/// Smallest root of `(λ·α(μ) + β)·μ = (f, g)`.
#[pyfunction]
#[pyo3(signature = (eigen_lambda, alpha, beta, fg, tol=1e-13))]
fn mu_infinity<'py>(
    py: Python<'py>,
    eigen_lambda: f64,
    alpha: &PyCoefficient,
    beta: f64,
    fg: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = solve_mu_infinity(eigen_lambda, &alpha.inner, beta, fg, tol).map_err(core_err)?;
    let d = PyDict::new(py);
    d.set_item("mu", m.mu)?;
    d.set_item("residual", m.residual)?;
    d.set_item("sign_changes", m.sign_changes)?;
    Ok(d)
}

/// RK4 solution of `dℓ/dt = (f,g) − (λ·α(ℓ) + β)·ℓ` at the given times.
#[pyfunction]
fn eigencase_ode(
    ell0: f64,
    eigen_lambda: f64,
    alpha: &PyCoefficient,
    beta: f64,
    fg: f64,
    dt_ode: f64,
    times: Vec<f64>,
) -> PyResult<Vec<f64>> {
    stationary::eigencase_ode(ell0, eigen_lambda, &alpha.inner, beta, fg, dt_ode, &times).map_err(core_err)
}

/// PDE and ODE series of the eigenfunction case for a TOML config string.
#[pyfunction]
fn eigencase<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse_config(config)?;
    let setup = cfg.eigencase().map_err(cli_err)?;
    let params = cfg.solver(setup.final_time).map_err(cli_err)?;
    let out = py.detach(|| run_eigencase(&setup, &params)).map_err(core_err)?;
    let d = PyDict::new(py);
    d.set_item("mu_infinity", out.mu_infinity.mu)?;
    d.set_item("eigen_lambda", out.eigen_lambda)?;
    d.set_item("fg", out.fg)?;
    d.set_item("times", out.times.clone())?;
    d.set_item("ell_pde", out.ell_pde.clone())?;
    d.set_item("ell_ode", out.ell_ode.clone())?;
    d.set_item("verdict", out.verdict.as_str())?;
    d.set_item("verdict_holds", out.verdict_holds())?;
    Ok(d)
}

/// Runs the acceptance suite and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (seed=None, dt=None))]
fn validate(py: Python<'_>, seed: Option<u64>, dt: Option<f64>) -> PyResult<String> {
    let mut s = ValidationSettings::default();
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(dt) = dt {
        s.dt = dt;
    }
    let report = py.detach(|| run_all(&s));
    to_json_string(&report).map_err(cli_err)
}

/// Runs the command line tool with the given arguments and returns its exit code.
#[pyfunction]
fn main(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("nonlocal".to_string()).chain(args).collect();
    py.detach(|| nonlocal_core::cli::run(argv))
}

#[pymodule]
fn nonlocal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyCoefficient>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(find_fixed_points, m)?)?;
    m.add_function(wrap_pyfunction!(mu_infinity, m)?)?;
    m.add_function(wrap_pyfunction!(eigencase_ode, m)?)?;
    m.add_function(wrap_pyfunction!(eigencase, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(main, m)?)?;
    Ok(())
}
