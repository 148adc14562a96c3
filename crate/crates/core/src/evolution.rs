//! Backward-Euler time marching with Picard freezing of the two nonlocal
//! coefficients, trapezoidal accumulation of the memory integral, the
//! whole-trajectory fixed-point iteration, and the discrete energy monitor.
//!
//! One step from `(uⁿ, Mⁿ)` to `tⁿ⁺¹ = tⁿ + dt` iterates
//!
//! ```text
//! μ    = ℓ(u⁽ᵏ⁾)
//! M⁽ᵏ⁾ = Mⁿ + dt/2·(h(tⁿ)uⁿ + h(tⁿ⁺¹)u⁽ᵏ⁾)
//! [(1/dt)I + diag(β(M⁽ᵏ⁾)) + α(μ)·A] u⁽ᵏ⁺¹⁾ = uⁿ/dt + f(tⁿ⁺¹)
//! ```
//!
//! until the sup-norm increment drops below `picard_tol`.

use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::ProblemSpec;
use crate::grid::{laplacian_matrix, linf, sample, weighted_dot, Grid, ScalarField};
use crate::sparse::{cg_solve_from, SparseMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    pub dt: f64,
    #[serde(skip)]
    pub t_end: f64,
    #[serde(default = "defaults::picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "defaults::picard_max")]
    pub picard_max: usize,
    #[serde(default = "defaults::cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "defaults::cg_max")]
    pub cg_max: usize,
    #[serde(default = "defaults::snapshot_stride")]
    pub snapshot_stride: usize,
}

mod defaults {
    pub fn picard_tol() -> f64 {
        1e-10
    }
    pub fn picard_max() -> usize {
        100
    }
    pub fn cg_tol() -> f64 {
        1e-12
    }
    pub fn cg_max() -> usize {
        20_000
    }
    pub fn snapshot_stride() -> usize {
        100
    }
}

impl SolverParams {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SolverParams {
            dt,
            t_end,
            picard_tol: defaults::picard_tol(),
            picard_max: defaults::picard_max(),
            cg_tol: defaults::cg_tol(),
            cg_max: defaults::cg_max(),
            snapshot_stride: defaults::snapshot_stride(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("dt", self.dt), ("t_end", self.t_end), ("picard_tol", self.picard_tol), ("cg_tol", self.cg_tol)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.picard_max == 0 || self.cg_max == 0 || self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter("picard_max, cg_max and snapshot_stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps and the step size actually used: `round(T/dt)` equal
    /// steps ending exactly at `T`, at least one.
    pub fn schedule(&self) -> (usize, f64) {
        if self.dt >= self.t_end {
            if self.dt > self.t_end {
                warn!("dt = {} exceeds t_end = {}; taking a single step of size t_end", self.dt, self.t_end);
            }
            return (1, self.t_end);
        }
        let n = (self.t_end / self.dt).round().max(1.0) as usize;
        let dt = self.t_end / n as f64;
        if ((dt - self.dt) / self.dt).abs() > 1e-9 {
            warn!("dt adjusted from {} to {} so that steps end at t_end", self.dt, dt);
        }
        (n, dt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub t: f64,
    pub u: ScalarField,
    /// `M(x) = ∫₀ᵗ h(s)u(x,s)ds`, trapezoidal in time.
    pub memory: ScalarField,
    pub step_index: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub ell_series: Vec<f64>,
    pub l2_series: Vec<f64>,
    pub linf_series: Vec<f64>,
    pub min_series: Vec<f64>,
    pub picard_iters: Vec<usize>,
    /// Sup norm of the memory field at each recorded time.
    pub memory_linf_series: Vec<f64>,
    /// Discrete energy residual of each step (entry 0 is 0).
    pub energy_residuals: Vec<f64>,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub final_state: EvolutionState,
    /// `max(|f|∞, |u0|∞)` over the step times.
    pub k_bound: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_linf(&self) -> f64 {
        self.linf_series.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.min_series.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Which part of the history enters the reaction coefficient in the
/// whole-trajectory iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// `β(∫₀ᵗ h w ds)`: the causal problem.
    Running,
    /// `β(∫₀^{t'} h w ds)` for every `t`, with a fixed `t' ∈ (0, T]`.
    Fixed(f64),
}

/// Sampled data of a problem on its grid, ready for time stepping.
#[derive(Debug, Clone)]
pub struct Evolution {
    spec: ProblemSpec,
    grid: Arc<Grid>,
    laplacian: SparseMatrix,
    g: ScalarField,
    f_space: ScalarField,
    u0: ScalarField,
}

impl Evolution {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let grid = spec.grid.build()?;
        let laplacian = laplacian_matrix(&grid);
        Ok(Evolution {
            g: sample(&spec.g, &grid)?,
            f_space: sample(&spec.f.space, &grid)?,
            u0: sample(&spec.u0, &grid)?,
            spec: spec.clone(),
            grid,
            laplacian,
        })
    }

    /// Uses an explicit initial field instead of sampling `spec.u0`.
    pub fn with_initial(mut self, u0: ScalarField) -> Result<Self> {
        if !u0.same_grid(&self.u0) {
            return Err(Error::GridMismatch);
        }
        self.u0 = u0;
        Ok(self)
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn laplacian(&self) -> &SparseMatrix {
        &self.laplacian
    }

    pub fn g(&self) -> &ScalarField {
        &self.g
    }

    pub fn initial_field(&self) -> &ScalarField {
        &self.u0
    }

    pub fn initial_state(&self) -> EvolutionState {
        EvolutionState {
            t: 0.0,
            u: self.u0.clone(),
            memory: ScalarField::zeros(self.grid.clone()),
            step_index: 0,
        }
    }

    fn weight(&self) -> f64 {
        self.grid.cell_volume()
    }

    fn ell(&self, u: &[f64]) -> f64 {
        weighted_dot(self.g.values(), u, self.weight())
    }

    pub fn forcing_at(&self, t: f64) -> Vec<f64> {
        let rho = self.spec.f.time.eval(t);
        self.f_space.values().iter().map(|v| rho * v).collect()
    }

    /// `max(|u0|∞, max_k |f(t_k)|∞)` over the step times of `params`.
    pub fn k_bound(&self, params: &SolverParams) -> f64 {
        let (n, dt) = params.schedule();
        let f_sup = linf(self.f_space.values());
        (1..=n)
            .map(|k| self.spec.f.time.eval(k as f64 * dt).abs() * f_sup)
            .fold(linf(self.u0.values()), f64::max)
    }

    fn alpha_at(&self, mu: f64, t: f64) -> Result<f64> {
        let a = self.spec.alpha.eval(mu, Some(t))?;
        if !(a > 0.0) {
            return Err(Error::NonPositiveDiffusion { t, value: a });
        }
        Ok(a)
    }

    /// Diagonal `1/dt + β(M)` with the positivity guard.
    fn reaction_diagonal(&self, memory: &[f64], dt: f64, t: f64) -> Result<Vec<f64>> {
        memory
            .iter()
            .enumerate()
            .map(|(node, &m)| {
                let value = 1.0 / dt + self.spec.beta.eval(m, Some(t))?;
                if value > 0.0 {
                    Ok(value)
                } else {
                    Err(Error::InvalidOperator { t, node, value })
                }
            })
            .collect()
    }

    fn solve_frozen(
        &self,
        alpha: f64,
        diagonal: &[f64],
        rhs: &[f64],
        guess: Vec<f64>,
        params: &SolverParams,
    ) -> Result<Vec<f64>> {
        let op = self.laplacian.scaled(alpha).add_diagonal(diagonal)?;
        let (x, _) = cg_solve_from(&op, rhs, guess, params.cg_tol, params.cg_max)?;
        Ok(x)
    }

    pub fn step(&self, state: &EvolutionState, params: &SolverParams) -> Result<(EvolutionState, usize)> {
        self.step_from_seed(state, params, None)
    }

    /// One implicit step whose Picard iteration starts from `seed` instead of `uⁿ`.
    pub fn step_from_seed(
        &self,
        state: &EvolutionState,
        params: &SolverParams,
        seed: Option<&ScalarField>,
    ) -> Result<(EvolutionState, usize)> {
        let (n_steps, dt) = params.schedule();
        let k_new = state.step_index + 1;
        if k_new > n_steps {
            return Err(Error::InvalidParameter(format!("step {k_new} past t_end = {}", params.t_end)));
        }
        let t_new = if k_new == n_steps { params.t_end } else { k_new as f64 * dt };
        let h_old = self.spec.h.eval(state.t);
        let h_new = self.spec.h.eval(t_new);
        let u_old = state.u.values();
        let m_old = state.memory.values();
        let rhs: Vec<f64> = u_old.iter().zip(self.forcing_at(t_new)).map(|(u, f)| u / dt + f).collect();
        let memory_with = |u: &[f64]| -> Vec<f64> {
            m_old
                .iter()
                .zip(u_old)
                .zip(u)
                .map(|((m, a), b)| m + 0.5 * dt * (h_old * a + h_new * b))
                .collect()
        };

        let mut iterate = match seed {
            Some(s) => {
                if !s.same_grid(&state.u) {
                    return Err(Error::GridMismatch);
                }
                s.values().to_vec()
            }
            None => u_old.to_vec(),
        };
        let mut increment = f64::INFINITY;
        for k in 1..=params.picard_max {
            let alpha = self.alpha_at(self.ell(&iterate), t_new)?;
            let diagonal = self.reaction_diagonal(&memory_with(&iterate), dt, t_new)?;
            let next = self.solve_frozen(alpha, &diagonal, &rhs, iterate.clone(), params)?;
            increment = next.iter().zip(&iterate).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            iterate = next;
            if increment <= params.picard_tol {
                let memory = memory_with(&iterate);
                let next_state = EvolutionState {
                    t: t_new,
                    u: ScalarField::new(self.grid.clone(), iterate)?,
                    memory: ScalarField::new(self.grid.clone(), memory)?,
                    step_index: state.step_index + 1,
                };
                return Ok((next_state, k));
            }
        }
        Err(Error::PicardDiverged { t: t_new, iterations: params.picard_max, increment })
    }

    /// `|uⁿ⁺¹|² − |uⁿ|² − 2dt[(f, uⁿ⁺¹) − α(μ)(A uⁿ⁺¹, uⁿ⁺¹) − (B uⁿ⁺¹, uⁿ⁺¹)]`
    /// with the coefficients recomputed from the committed state. Backward
    /// Euler makes this equal to `−|uⁿ⁺¹ − uⁿ|²` up to solver error.
    pub fn energy_residual(&self, prev: &EvolutionState, next: &EvolutionState) -> Result<f64> {
        let dt = next.t - prev.t;
        let w = self.weight();
        let u = next.u.values();
        let alpha = self.spec.alpha.eval(self.ell(u), Some(next.t))?;
        let au = self.laplacian.spmv(u)?;
        let f = self.forcing_at(next.t);
        let mut reaction = 0.0;
        for (&m, &ui) in next.memory.values().iter().zip(u) {
            reaction += self.spec.beta.eval(m, Some(next.t))? * ui * ui;
        }
        reaction *= w;
        let work = weighted_dot(&f, u, w) - alpha * weighted_dot(&au, u, w) - reaction;
        let new_sq = weighted_dot(u, u, w);
        let old_sq = weighted_dot(prev.u.values(), prev.u.values(), w);
        Ok(new_sq - old_sq - 2.0 * dt * work)
    }

    fn record(&self, traj: &mut Trajectory, state: &EvolutionState, picard: usize, energy: f64) {
        let u = state.u.values();
        traj.times.push(state.t);
        traj.ell_series.push(self.ell(u));
        traj.l2_series.push(weighted_dot(u, u, self.weight()).sqrt());
        traj.linf_series.push(linf(u));
        traj.min_series.push(state.u.min());
        traj.picard_iters.push(picard);
        traj.memory_linf_series.push(linf(state.memory.values()));
        traj.energy_residuals.push(energy);
    }

    fn empty_trajectory(&self, params: &SolverParams) -> Trajectory {
        let state = self.initial_state();
        Trajectory {
            times: Vec::new(),
            ell_series: Vec::new(),
            l2_series: Vec::new(),
            linf_series: Vec::new(),
            min_series: Vec::new(),
            picard_iters: Vec::new(),
            memory_linf_series: Vec::new(),
            energy_residuals: Vec::new(),
            snapshots: vec![(0.0, state.u.clone())],
            k_bound: self.k_bound(params),
            final_state: state,
        }
    }

    /// Marches from `u0` to `t_end`.
    pub fn run(&self, params: &SolverParams) -> Result<Trajectory> {
        params.validate()?;
        let (n_steps, _) = params.schedule();
        let mut traj = self.empty_trajectory(params);
        let mut state = self.initial_state();
        self.record(&mut traj, &state, 0, 0.0);
        for k in 1..=n_steps {
            let (next, iters) = self.step(&state, params)?;
            let energy = self.energy_residual(&state, &next)?;
            self.record(&mut traj, &next, iters, energy);
            if k % params.snapshot_stride == 0 || k == n_steps {
                traj.snapshots.push((next.t, next.u.clone()));
            }
            state = next;
        }
        traj.final_state = state;
        Ok(traj)
    }

    /// Iterates the frozen-coefficient solution map on whole trajectories:
    /// coefficients at every step come from the previous sweep `w`, starting
    /// from `w(t) = u0`. Returns the fixed point, the sweep count and the
    /// residual `max_k ‖u(t_k) − w(t_k)‖∞` of every sweep.
    pub fn run_global_picard(
        &self,
        params: &SolverParams,
        horizon: Horizon,
    ) -> Result<(Trajectory, usize, Vec<f64>)> {
        params.validate()?;
        if let Horizon::Fixed(tp) = horizon {
            if !(tp > 0.0 && tp <= params.t_end * (1.0 + 1e-12)) {
                return Err(Error::InvalidParameter(format!("horizon {tp} outside (0, {}]", params.t_end)));
            }
        }
        let (n_steps, dt) = params.schedule();
        let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
        let h: Vec<f64> = times.iter().map(|&t| self.spec.h.eval(t)).collect();

        let mut w: Vec<Vec<f64>> = vec![self.u0.values().to_vec(); n_steps + 1];
        let mut residuals = Vec::new();
        for sweep in 1..=params.picard_max {
            let memory = trapezoid_memory(&w, &h, dt);
            let fixed_memory = match horizon {
                Horizon::Running => None,
                Horizon::Fixed(tp) => Some(memory_at(&memory, &w, &h, dt, tp)),
            };
            let mut u = Vec::with_capacity(n_steps + 1);
            u.push(self.u0.values().to_vec());
            for k in 1..=n_steps {
                let t = times[k];
                let alpha = self.alpha_at(self.ell(&w[k]), t)?;
                let m = fixed_memory.as_deref().unwrap_or(&memory[k]);
                let diagonal = self.reaction_diagonal(m, dt, t)?;
                let prev: &Vec<f64> = &u[k - 1];
                let rhs: Vec<f64> = prev.iter().zip(self.forcing_at(t)).map(|(a, f)| a / dt + f).collect();
                let next = self.solve_frozen(alpha, &diagonal, &rhs, w[k].clone(), params)?;
                u.push(next);
            }
            let residual = u
                .iter()
                .zip(&w)
                .map(|(a, b)| a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
                .fold(0.0, f64::max);
            residuals.push(residual);
            w = u;
            if residual <= params.picard_tol {
                let traj = self.assemble(&w, &h, dt, params)?;
                return Ok((traj, sweep, residuals));
            }
        }
        Err(Error::OuterDiverged { iterations: params.picard_max, residual: *residuals.last().unwrap() })
    }

    fn assemble(&self, u: &[Vec<f64>], h: &[f64], dt: f64, params: &SolverParams) -> Result<Trajectory> {
        let memory = trapezoid_memory(u, h, dt);
        let mut traj = self.empty_trajectory(params);
        let n_steps = u.len() - 1;
        let mut prev: Option<EvolutionState> = None;
        for (k, (uk, mk)) in u.iter().zip(memory).enumerate() {
            let state = EvolutionState {
                t: if k == n_steps { params.t_end } else { k as f64 * dt },
                u: ScalarField::new(self.grid.clone(), uk.clone())?,
                memory: ScalarField::new(self.grid.clone(), mk)?,
                step_index: k,
            };
            let energy = match &prev {
                Some(p) => self.energy_residual(p, &state)?,
                None => 0.0,
            };
            self.record(&mut traj, &state, usize::from(k > 0), energy);
            if k > 0 && (k % params.snapshot_stride == 0 || k == n_steps) {
                traj.snapshots.push((state.t, state.u.clone()));
            }
            prev = Some(state);
        }
        traj.final_state = prev.expect("trajectory has at least one state");
        Ok(traj)
    }
}

/// Cumulative trapezoid `M_k = Σ_{j<k} dt/2·(h_j w_j + h_{j+1} w_{j+1})`.
fn trapezoid_memory(w: &[Vec<f64>], h: &[f64], dt: f64) -> Vec<Vec<f64>> {
    let n = w[0].len();
    let mut out = Vec::with_capacity(w.len());
    let mut acc = vec![0.0; n];
    out.push(acc.clone());
    for k in 1..w.len() {
        for i in 0..n {
            acc[i] += 0.5 * dt * (h[k - 1] * w[k - 1][i] + h[k] * w[k][i]);
        }
        out.push(acc.clone());
    }
    out
}

/// Memory at an arbitrary time, trapezoid on the partial step with `w`
/// interpolated linearly.
fn memory_at(memory: &[Vec<f64>], w: &[Vec<f64>], h: &[f64], dt: f64, t: f64) -> Vec<f64> {
    let last = memory.len() - 1;
    let k = ((t / dt).floor() as usize).min(last);
    let tau = t - k as f64 * dt;
    if k == last || tau <= 0.0 {
        return memory[k].clone();
    }
    let theta = tau / dt;
    let h_mid = h[k] + theta * (h[k + 1] - h[k]);
    memory[k]
        .iter()
        .zip(&w[k])
        .zip(&w[k + 1])
        .map(|((m, a), b)| {
            let w_mid = a + theta * (b - a);
            m + 0.5 * tau * (h[k] * a + h_mid * w_mid)
        })
        .collect()
}

/// Convenience wrapper: sample `spec` and march it.
pub fn run(spec: &ProblemSpec, params: &SolverParams) -> Result<Trajectory> {
    Evolution::new(spec)?.run(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{CoefficientFn, Forcing, GridSpec, SpatialFn, TimeProfile};
    use crate::grid::{integrate_product, l2_norm};
    use approx::assert_relative_eq;

    fn sine_spec(alpha: f64, beta: f64, final_time: f64) -> ProblemSpec {
        ProblemSpec {
            grid: GridSpec::unit_interval(32),
            alpha: CoefficientFn::Constant { c: alpha },
            beta: CoefficientFn::Constant { c: beta },
            g: SpatialFn::Constant { value: 1.0 },
            h: TimeProfile::Constant { c: 1.0 },
            f: Forcing::zero(),
            u0: SpatialFn::SineMode { amplitude: 1.0, modes: vec![1] },
            final_time,
        }
    }

    fn nonlinear_spec() -> ProblemSpec {
        ProblemSpec {
            grid: GridSpec::unit_interval(32),
            alpha: CoefficientFn::RationalBump { a: 0.5, b: 1.0 },
            beta: CoefficientFn::Arctan { a: 1.5, b: 0.4, c: 2.0 },
            g: SpatialFn::Parabola { amplitude: 4.0 },
            h: TimeProfile::Constant { c: 1.0 },
            f: Forcing::stationary(SpatialFn::Gaussian { amplitude: 2.0, center: vec![0.3], width: 0.2 }),
            u0: SpatialFn::SineMode { amplitude: 1.0, modes: vec![2] },
            final_time: 0.2,
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let mut spec = sine_spec(1.0, 1.0, 0.05);
        spec.u0 = SpatialFn::Constant { value: 0.0 };
        let ev = Evolution::new(&spec).unwrap();
        let params = SolverParams::new(1e-2, 0.05);
        let (next, iters) = ev.step(&ev.initial_state(), &params).unwrap();
        assert_eq!(iters, 1);
        assert!(next.u.values().iter().all(|&v| v == 0.0));
        let traj = ev.run(&params).unwrap();
        for s in [&traj.ell_series, &traj.l2_series, &traj.linf_series, &traj.min_series] {
            assert!(s.iter().all(|&v| v == 0.0));
        }
        assert!(traj.energy_residuals.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn eigenmode_matches_scalar_recurrence() {
        let (alpha, beta) = (0.7, 0.3);
        let spec = sine_spec(alpha, beta, 0.1);
        let ev = Evolution::new(&spec).unwrap();
        let params = SolverParams::new(1e-2, 0.1);
        let traj = ev.run(&params).unwrap();
        let lambda_h = ev.grid().discrete_eigenvalue(&[1]);
        let factor = 1.0 / (1.0 + 1e-2 * (alpha * lambda_h + beta));
        let u_end = traj.final_state.u.values();
        for (i, &u) in u_end.iter().enumerate() {
            let expected = factor.powi(10) * ev.initial_field().values()[i];
            assert!((u - expected).abs() <= 1e-12, "node {i}: {u} vs {expected}");
        }
        assert_eq!(traj.times.len(), 11);
        assert_relative_eq!(*traj.times.last().unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn small_step_changes_solution_by_order_dt() {
        let spec = nonlinear_spec();
        let ev = Evolution::new(&spec).unwrap();
        let mut changes = Vec::new();
        for dt in [1e-4, 1e-5] {
            let params = SolverParams::new(dt, 0.2);
            let (next, _) = ev.step(&ev.initial_state(), &params).unwrap();
            let d = next.u.difference(&ev.initial_state().u).unwrap();
            changes.push(crate::grid::linf_norm(&d));
        }
        let ratio = changes[1] / changes[0];
        assert!(ratio > 0.05 && ratio < 0.2, "{changes:?}");
    }

    #[test]
    fn memory_is_trapezoid_of_recorded_states() {
        let spec = nonlinear_spec();
        let ev = Evolution::new(&spec).unwrap();
        let mut params = SolverParams::new(1e-2, 0.2);
        params.snapshot_stride = 1;
        let traj = ev.run(&params).unwrap();
        let states: Vec<Vec<f64>> = traj.snapshots.iter().map(|(_, u)| u.values().to_vec()).collect();
        let h = vec![1.0; states.len()];
        let m = trapezoid_memory(&states, &h, 1e-2);
        let diff = m.last().unwrap().iter().zip(traj.final_state.memory.values()).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(diff <= 1e-12, "{diff}");
    }

    #[test]
    fn energy_residual_is_dissipative() {
        let ev = Evolution::new(&nonlinear_spec()).unwrap();
        let params = SolverParams::new(1e-3, 0.2);
        let traj = ev.run(&params).unwrap();
        let l2 = &traj.l2_series;
        for (k, r) in traj.energy_residuals.iter().enumerate().skip(1) {
            assert!(*r <= 1e-8 * (1.0 + l2[k - 1] * l2[k - 1]), "step {k}: {r}");
        }
    }

    #[test]
    fn energy_residual_of_zero_states_is_zero() {
        let mut spec = sine_spec(1.0, 1.0, 1.0);
        spec.u0 = SpatialFn::Constant { value: 0.0 };
        let ev = Evolution::new(&spec).unwrap();
        let s0 = ev.initial_state();
        let mut s1 = s0.clone();
        s1.t = 0.1;
        assert_eq!(ev.energy_residual(&s0, &s1).unwrap(), 0.0);
    }

    #[test]
    fn positivity_guard_names_gauge_shift() {
        let mut spec = sine_spec(1.0, -200.0, 0.1);
        spec.beta = CoefficientFn::Constant { c: -200.0 };
        let ev = Evolution::new(&spec).unwrap();
        let err = ev.run(&SolverParams::new(1e-2, 0.1)).unwrap_err();
        assert!(matches!(err, Error::InvalidOperator { .. }));
        assert!(err.to_string().contains("gauge shift"));
    }

    #[test]
    fn picard_limit_is_reported() {
        let ev = Evolution::new(&nonlinear_spec()).unwrap();
        let mut params = SolverParams::new(1e-2, 0.2);
        params.picard_max = 1;
        assert!(matches!(ev.run(&params), Err(Error::PicardDiverged { .. })));
    }

    #[test]
    fn oversized_dt_takes_single_step() {
        let spec = sine_spec(1.0, 1.0, 0.1);
        let traj = run(&spec, &SolverParams::new(1.0, 0.1)).unwrap();
        assert_eq!(traj.times, vec![0.0, 0.1]);
    }

    #[test]
    fn seed_independence() {
        let ev = Evolution::new(&nonlinear_spec()).unwrap();
        let params = SolverParams::new(1e-2, 0.2);
        let s0 = ev.initial_state();
        let (a, _) = ev.step(&s0, &params).unwrap();
        let zero = ScalarField::zeros(ev.grid().clone());
        let (b, _) = ev.step_from_seed(&s0, &params, Some(&zero)).unwrap();
        let d = crate::grid::linf_norm(&a.u.difference(&b.u).unwrap());
        assert!(d <= 10.0 * params.picard_tol, "{d}");
    }

    #[test]
    fn global_picard_zero_data() {
        let mut spec = sine_spec(1.0, 1.0, 0.05);
        spec.u0 = SpatialFn::Constant { value: 0.0 };
        let ev = Evolution::new(&spec).unwrap();
        let (traj, sweeps, res) = ev.run_global_picard(&SolverParams::new(1e-2, 0.05), Horizon::Running).unwrap();
        assert_eq!(sweeps, 1);
        assert_eq!(res, vec![0.0]);
        assert!(traj.linf_series.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn global_picard_constant_coefficients_match_run() {
        let spec = sine_spec(0.8, 1.2, 0.1);
        let ev = Evolution::new(&spec).unwrap();
        let params = SolverParams::new(1e-2, 0.1);
        let direct = ev.run(&params).unwrap();
        for horizon in [Horizon::Running, Horizon::Fixed(0.1)] {
            let (global, _, _) = ev.run_global_picard(&params, horizon).unwrap();
            let d = direct.final_state.u.difference(&global.final_state.u).unwrap();
            assert!(crate::grid::linf_norm(&d) <= 1e-10);
        }
    }

    #[test]
    fn global_picard_matches_stepwise() {
        let ev = Evolution::new(&nonlinear_spec()).unwrap();
        let mut params = SolverParams::new(1e-2, 0.2);
        params.snapshot_stride = 5;
        let direct = ev.run(&params).unwrap();
        let (global, _, res) = ev.run_global_picard(&params, Horizon::Running).unwrap();
        for ((t1, a), (t2, b)) in direct.snapshots.iter().zip(&global.snapshots) {
            assert_relative_eq!(*t1, *t2, epsilon = 1e-12);
            let d = crate::grid::linf_norm(&a.difference(b).unwrap());
            assert!(d <= 10.0 * params.picard_tol, "t = {t1}: {d}");
        }
        for w in res.windows(2).skip(1) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn fixed_horizon_memory_interpolates() {
        let w = vec![vec![1.0], vec![3.0], vec![5.0]];
        let h = vec![1.0; 3];
        let m = trapezoid_memory(&w, &h, 0.5);
        assert_eq!(m[1], vec![1.0]);
        assert_eq!(m[2], vec![3.0]);
        // w is linear in time (1 + 4t), so the trapezoid is exact
        let at = memory_at(&m, &w, &h, 0.5, 0.75);
        assert_relative_eq!(at[0], 0.75 + 2.0 * 0.75 * 0.75, epsilon = 1e-14);
        assert!(Evolution::new(&nonlinear_spec())
            .unwrap()
            .run_global_picard(&SolverParams::new(1e-2, 0.2), Horizon::Fixed(0.5))
            .is_err());
    }

    #[test]
    fn nonnegative_data_keep_solution_and_memory_monotone() {
        let mut spec = nonlinear_spec();
        spec.u0 = SpatialFn::Parabola { amplitude: 3.0 };
        let ev2 = Evolution::new(&spec).unwrap();
        let params = SolverParams::new(1e-2, 0.2);
        let traj = ev2.run(&params).unwrap();
        assert!(traj.min_value() >= -1e-10);
        assert!(traj.memory_linf_series.windows(2).all(|w| w[1] >= w[0]));
        let ell = integrate_product(ev2.g(), &traj.final_state.u).unwrap();
        assert_relative_eq!(ell, *traj.ell_series.last().unwrap(), epsilon = 1e-14);
        assert!(l2_norm(&traj.final_state.u) > 0.0);
    }
}
