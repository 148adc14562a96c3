//! The case where `g` is the first Dirichlet eigenfunction, `β` is constant
//! and `f = ρ·g`. Testing the equation against `g` gives the scalar ODE
//! `dℓ/dt = (f,g) − (λ·α(ℓ) + β)·ℓ`, which holds exactly on the grid when
//! `g` is the sampled sine mode and `λ` its discrete eigenvalue.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Evolution, SolverParams, Trajectory};
use crate::functions::{CoefficientFn, Forcing, GridSpec, ProblemSpec, SpatialFn, TimeProfile};
use crate::grid::{integrate_product, sample};
use crate::stationary::{eigencase_ode, solve_mu_infinity, MuInfinity};

#[derive(Debug, Clone, PartialEq)]
pub struct EigencaseSetup {
    pub grid: GridSpec,
    pub alpha: CoefficientFn,
    pub beta: f64,
    pub rho: f64,
    pub u0: SpatialFn,
    pub final_time: f64,
    /// Replace `u0` by the multiple of `g` with `ℓ(u0) = μ∞`.
    pub start_at_equilibrium: bool,
    pub dt_ode: f64,
    pub mu_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Increasing,
    Decreasing,
    Stationary,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Increasing => "increasing",
            Verdict::Decreasing => "decreasing",
            Verdict::Stationary => "stationary",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigencaseOutcome {
    pub spec: ProblemSpec,
    pub eigen_lambda: f64,
    /// `(f, g)`
    pub fg: f64,
    pub ell0: f64,
    pub mu_infinity: MuInfinity,
    pub times: Vec<f64>,
    pub ell_pde: Vec<f64>,
    pub ell_ode: Vec<f64>,
    /// Direction predicted by `sign(μ∞ − ℓ(u0))`.
    pub verdict: Verdict,
    /// Largest step of `ℓ_pde` against the predicted direction (for
    /// `Stationary`, the largest deviation from `μ∞`).
    pub monotonicity_violation: f64,
    pub trajectory: Trajectory,
}

impl EigencaseOutcome {
    pub fn max_ode_discrepancy(&self) -> f64 {
        self.ell_pde.iter().zip(&self.ell_ode).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Tolerance on the monotonicity violation.
    pub fn monotonicity_tolerance(&self) -> f64 {
        match self.verdict {
            Verdict::Stationary => 1e-6,
            _ => 1e-10 * self.mu_infinity.mu.max(1.0),
        }
    }

    pub fn verdict_holds(&self) -> bool {
        self.monotonicity_violation <= self.monotonicity_tolerance()
    }
}

fn first_mode(dim: usize) -> SpatialFn {
    SpatialFn::SineMode { amplitude: 1.0, modes: vec![1; dim] }
}

pub fn run_eigencase(setup: &EigencaseSetup, params: &SolverParams) -> Result<EigencaseOutcome> {
    if setup.grid.n_cells.len() != 1 {
        return Err(Error::InvalidParameter("the eigenfunction case runs on a 1D grid".into()));
    }
    if !(setup.rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be positive so that (f, g) > 0, got {}", setup.rho)));
    }
    let g = first_mode(1);
    let mut spec = ProblemSpec {
        grid: setup.grid.clone(),
        alpha: setup.alpha.clone(),
        beta: CoefficientFn::Constant { c: setup.beta },
        g: g.clone(),
        h: TimeProfile::Constant { c: 1.0 },
        f: Forcing::stationary(SpatialFn::SineMode { amplitude: setup.rho, modes: vec![1] }),
        u0: setup.u0.clone(),
        final_time: setup.final_time,
    };
    let grid = spec.grid.build()?;
    let eigen_lambda = grid.discrete_eigenvalue(&[1]);
    let g_field = sample(&g, &grid)?;
    let gg = integrate_product(&g_field, &g_field)?;
    let fg = setup.rho * gg;
    let mu_infinity = solve_mu_infinity(eigen_lambda, &setup.alpha, setup.beta, fg, setup.mu_tol)?;
    if setup.start_at_equilibrium {
        spec.u0 = SpatialFn::SineMode { amplitude: mu_infinity.mu / gg, modes: vec![1] };
    }

    let evolution = Evolution::new(&spec)?;
    let ell0 = integrate_product(&g_field, evolution.initial_field())?;
    let trajectory = evolution.run(params)?;
    let ell_ode = eigencase_ode(
        ell0,
        eigen_lambda,
        &setup.alpha,
        setup.beta,
        fg,
        setup.dt_ode,
        &trajectory.times,
    )?;

    let mu = mu_infinity.mu;
    let verdict = if (ell0 - mu).abs() <= 1e-8 * mu.max(1.0) {
        Verdict::Stationary
    } else if ell0 < mu {
        Verdict::Increasing
    } else {
        Verdict::Decreasing
    };
    let ell = &trajectory.ell_series;
    let monotonicity_violation = match verdict {
        Verdict::Stationary => ell.iter().fold(0.0_f64, |m, l| m.max((l - mu).abs())),
        Verdict::Increasing => ell.windows(2).fold(0.0_f64, |m, w| m.max(w[0] - w[1])),
        Verdict::Decreasing => ell.windows(2).fold(0.0_f64, |m, w| m.max(w[1] - w[0])),
    };

    Ok(EigencaseOutcome {
        spec,
        eigen_lambda,
        fg,
        ell0,
        mu_infinity,
        times: trajectory.times.clone(),
        ell_pde: trajectory.ell_series.clone(),
        ell_ode,
        verdict,
        monotonicity_violation,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::l2_norm;

    fn setup(u0: SpatialFn) -> EigencaseSetup {
        EigencaseSetup {
            grid: GridSpec::unit_interval(64),
            alpha: CoefficientFn::RationalBump { a: 1.0, b: 1.0 },
            beta: 1.0,
            rho: 4.0,
            u0,
            final_time: 1.0,
            start_at_equilibrium: false,
            dt_ode: 1e-3,
            mu_tol: 1e-13,
        }
    }

    #[test]
    fn equilibrium_start_is_stationary() {
        let mut s = setup(SpatialFn::Constant { value: 0.0 });
        s.start_at_equilibrium = true;
        let out = run_eigencase(&s, &SolverParams::new(1e-2, 1.0)).unwrap();
        assert_eq!(out.verdict, Verdict::Stationary);
        assert!(out.max_ode_discrepancy() <= 1e-6);
        assert!(out.verdict_holds());
    }

    #[test]
    fn start_below_increases() {
        let out = run_eigencase(&setup(SpatialFn::Constant { value: 0.0 }), &SolverParams::new(1e-3, 1.0)).unwrap();
        assert_eq!(out.verdict, Verdict::Increasing);
        assert!(out.verdict_holds(), "{}", out.monotonicity_violation);
        assert!(out.max_ode_discrepancy() < 1e-2);
    }

    #[test]
    fn solution_stays_in_the_mode() {
        let s = setup(SpatialFn::SineMode { amplitude: 3.0, modes: vec![1] });
        let out = run_eigencase(&s, &SolverParams::new(1e-2, 1.0)).unwrap();
        assert_eq!(out.verdict, Verdict::Decreasing);
        let grid = out.spec.grid.build().unwrap();
        let g = sample(&first_mode(1), &grid).unwrap();
        let gg = integrate_product(&g, &g).unwrap();
        for (t, u) in &out.trajectory.snapshots {
            let coeff = integrate_product(&g, u).unwrap() / gg;
            let off = u.difference(&g.scaled(coeff)).unwrap();
            assert!(l2_norm(&off).powi(2) <= 1e-9, "t = {t}");
        }
    }

    #[test]
    fn rejects_2d_and_nonpositive_rho() {
        let mut s = setup(SpatialFn::Constant { value: 0.0 });
        s.rho = 0.0;
        assert!(run_eigencase(&s, &SolverParams::new(1e-2, 1.0)).is_err());
        let mut s = setup(SpatialFn::Constant { value: 0.0 });
        s.grid = GridSpec::unit_square(8);
        assert!(run_eigencase(&s, &SolverParams::new(1e-2, 1.0)).is_err());
    }
}
