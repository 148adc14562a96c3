//! Long-time limit: the stationary problem
//! `−α(ℓ(u)) Δu + β_∞ u = f` reduced to scalar equations in the diffusion
//! parameter, plus the eigenfunction case where `ℓ(u)` obeys a scalar ODE.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::functions::{CoefficientFn, ProblemSpec};
use crate::grid::{l2_norm, laplacian_matrix, weighted_dot, Grid, ScalarField};
use crate::sparse::{cg_solve, SparseMatrix};

/// Relative slack applied to the analytic bounds of `alpha` when building the
/// scan interval.
pub const BRACKET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct StationaryProblem {
    grid: Arc<Grid>,
    laplacian: SparseMatrix,
    beta_inf: ScalarField,
    f: ScalarField,
    g: ScalarField,
    alpha: CoefficientFn,
    cg_tol: f64,
    cg_max: usize,
}

#[derive(Debug, Clone)]
pub struct Root {
    pub mu: f64,
    pub u_mu: ScalarField,
    /// `|Φ(μ) − μ|`
    pub residual: f64,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub roots: Vec<Root>,
    /// `(μ, Φ(μ))` on the uniform scan.
    pub scan_values: Vec<(f64, f64)>,
}

impl StationaryProblem {
    pub fn new(beta_inf: ScalarField, f: ScalarField, g: ScalarField, alpha: CoefficientFn) -> Result<Self> {
        if !beta_inf.same_grid(&f) || !beta_inf.same_grid(&g) {
            return Err(Error::GridMismatch);
        }
        alpha.validate()?;
        if alpha.is_time_dependent() {
            return Err(Error::InvalidParameter("stationary alpha cannot depend on time".into()));
        }
        let grid = beta_inf.grid().clone();
        Ok(StationaryProblem {
            laplacian: laplacian_matrix(&grid),
            grid,
            beta_inf,
            f,
            g,
            alpha,
            cg_tol: 1e-12,
            cg_max: 20_000,
        })
    }

    pub fn with_cg(mut self, cg_tol: f64, cg_max: usize) -> Self {
        self.cg_tol = cg_tol;
        self.cg_max = cg_max;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn alpha(&self) -> &CoefficientFn {
        &self.alpha
    }

    pub fn beta_inf(&self) -> &ScalarField {
        &self.beta_inf
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }

    pub fn g(&self) -> &ScalarField {
        &self.g
    }

    pub fn ell(&self, u: &ScalarField) -> f64 {
        weighted_dot(self.g.values(), u.values(), self.grid.cell_volume())
    }

    fn operator(&self, mu: f64) -> Result<SparseMatrix> {
        self.laplacian.scaled(mu).add_diagonal(self.beta_inf.values())
    }

    /// `u_μ`: solution of `(μ·A + diag(β_∞)) u = f`.
    pub fn solve_elliptic(&self, mu: f64) -> Result<ScalarField> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("diffusion parameter must be positive, got {mu}")));
        }
        let (u, _) = cg_solve(&self.operator(mu)?, self.f.values(), self.cg_tol, self.cg_max)?;
        ScalarField::new(self.grid.clone(), u)
    }

    /// `‖(μ·A + diag(β_∞)) u − f‖₂` in the Euclidean norm of nodal values.
    pub fn operator_residual(&self, mu: f64, u: &ScalarField) -> Result<f64> {
        let au = self.operator(mu)?.spmv(u.values())?;
        Ok(au.iter().zip(self.f.values()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    /// `Φ(μ) = α(ℓ(u_μ))`
    pub fn phi(&self, mu: f64) -> Result<f64> {
        let u = self.solve_elliptic(mu)?;
        self.alpha.eval(self.ell(&u), None)
    }

    /// `Ψ(μ) = ℓ(u_{α(μ)})`
    pub fn psi(&self, mu: f64) -> Result<f64> {
        let a = self.alpha.eval(mu, None)?;
        Ok(self.ell(&self.solve_elliptic(a)?))
    }

    /// Scans `Φ(μ) − μ` over `[α₀, α₁]` (with slack) and bisects every sign
    /// change. Roots are only as complete as the scan resolution.
    pub fn find_fixed_points(&self, scan_n: usize, root_tol: f64) -> Result<FixedPointResult> {
        if scan_n < 1 || !(root_tol > 0.0) {
            return Err(Error::InvalidParameter("scan_n must be >= 1 and root_tol positive".into()));
        }
        let (a0, a1) = self.alpha.bounds();
        if !(a0 > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha lower bound must be positive, got {a0}")));
        }
        let left = a0 * (1.0 - BRACKET_SLACK);
        let right = a1 * (1.0 + BRACKET_SLACK);
        let mus: Vec<f64> = (0..=scan_n)
            .map(|i| if i == scan_n { right } else { left + (right - left) * i as f64 / scan_n as f64 })
            .collect();
        let scan_values: Vec<(f64, f64)> =
            mus.par_iter().map(|&mu| self.phi(mu).map(|p| (mu, p))).collect::<Result<_>>()?;
        let s: Vec<f64> = scan_values.iter().map(|(mu, p)| p - mu).collect();

        if s[0] < -root_tol || s[scan_n] > root_tol {
            return Err(Error::NoSignChange {
                reason: format!(
                    "phi does not map into [{a0}, {a1}]: s(left) = {:e}, s(right) = {:e}",
                    s[0], s[scan_n]
                ),
                scan: scan_values,
            });
        }

        let mut roots = Vec::new();
        for i in 0..=scan_n {
            if s[i] == 0.0 {
                let mu = mus[i];
                roots.push(self.make_root(mu, (mu, mu))?);
            } else if i < scan_n && s[i] * s[i + 1] < 0.0 {
                roots.push(self.bisect(mus[i], mus[i + 1], s[i], root_tol)?);
            }
        }
        if roots.is_empty() {
            return Err(Error::NoSignChange { reason: "no bracket found on the scan".into(), scan: scan_values });
        }
        roots.sort_by(|a, b| a.mu.total_cmp(&b.mu));
        Ok(FixedPointResult { roots, scan_values })
    }

    fn make_root(&self, mu: f64, bracket: (f64, f64)) -> Result<Root> {
        let u_mu = self.solve_elliptic(mu)?;
        let residual = (self.alpha.eval(self.ell(&u_mu), None)? - mu).abs();
        Ok(Root { mu, u_mu, residual, bracket })
    }

    /// Bisection until the bracket is narrower than `tol` and the midpoint
    /// residual is below `tol`, or the bracket cannot shrink further.
    fn bisect(&self, mut a: f64, mut b: f64, mut sa: f64, tol: f64) -> Result<Root> {
        loop {
            let mid = 0.5 * (a + b);
            let sm = self.phi(mid)? - mid;
            let narrow = b - a <= tol;
            if (narrow && sm.abs() <= tol) || sm == 0.0 || mid <= a || mid >= b {
                return self.make_root(mid, (a, b));
            }
            if sa * sm < 0.0 {
                b = mid;
            } else {
                a = mid;
                sa = sm;
            }
        }
    }
}

/// `β` applied nodewise to the final memory field, and whether the memory
/// sup norm moved by at most `1e-6` (relative) over the last tenth of the run.
pub fn beta_limit_estimate(traj: &Trajectory, spec: &ProblemSpec) -> Result<(ScalarField, bool)> {
    let state = &traj.final_state;
    let mut values = Vec::with_capacity(state.memory.values().len());
    for &m in state.memory.values() {
        values.push(spec.beta.eval(m, Some(state.t))?);
    }
    let field = ScalarField::new(state.memory.grid().clone(), values)?;

    let t_end = state.t;
    let k = traj.times.partition_point(|&t| t < 0.9 * t_end).min(traj.times.len() - 1);
    let m_end = *traj.memory_linf_series.last().unwrap_or(&0.0);
    let m_then = traj.memory_linf_series.get(k).copied().unwrap_or(m_end);
    let converged = m_end == 0.0 || ((m_end - m_then) / m_end).abs() <= 1e-6;
    Ok((field, converged))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuInfinity {
    pub mu: f64,
    /// `(λ·α(μ) + β)·μ − (f, g)`
    pub residual: f64,
    /// Sign changes of the residual seen on the scan of `[0, (f,g)/β]`; more
    /// than one means the uniqueness hypothesis fails and the smallest root
    /// was returned.
    pub sign_changes: usize,
}

const MU_INF_SCAN: usize = 1000;

/// Smallest root of `(λ·α(μ) + β)·μ = (f, g)` on `[0, (f,g)/β]`.
pub fn solve_mu_infinity(
    eigen_lambda: f64,
    alpha: &CoefficientFn,
    beta_c: f64,
    fg: f64,
    tol: f64,
) -> Result<MuInfinity> {
    if !(fg > 0.0) {
        return Err(Error::InvalidParameter(format!("(f, g) must be positive, got {fg}")));
    }
    if !(beta_c > 0.0 && eigen_lambda > 0.0 && tol > 0.0) {
        return Err(Error::InvalidParameter("beta, eigenvalue and tolerance must be positive".into()));
    }
    let r = |mu: f64| -> Result<f64> { Ok((eigen_lambda * alpha.eval(mu, None)? + beta_c) * mu - fg) };
    let right = fg / beta_c;
    let grid: Vec<f64> = (0..=MU_INF_SCAN).map(|i| right * i as f64 / MU_INF_SCAN as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&m| r(m)).collect::<Result<_>>()?;

    let mut first = None;
    let mut sign_changes = 0;
    for i in 0..MU_INF_SCAN {
        let crosses = vals[i + 1] == 0.0 || vals[i] * vals[i + 1] < 0.0;
        if crosses {
            sign_changes += 1;
            if first.is_none() {
                first = Some(i);
            }
        }
    }
    // r(0) = −fg < 0 ≤ r(right) whenever α ≥ 0 on the interval.
    let i = first.ok_or_else(|| {
        Error::InvalidParameter("no root of the eigencase equation: alpha must be nonnegative".into())
    })?;
    if sign_changes > 1 {
        log::warn!("eigencase equation has {sign_changes} roots on the scan; returning the smallest");
    }
    let (mut a, mut b) = (grid[i], grid[i + 1]);
    if vals[i + 1] == 0.0 {
        return Ok(MuInfinity { mu: b, residual: 0.0, sign_changes });
    }
    let mut ra = vals[i];
    loop {
        let mid = 0.5 * (a + b);
        let rm = r(mid)?;
        if (b - a <= tol && rm.abs() <= tol * fg) || rm == 0.0 || mid <= a || mid >= b {
            return Ok(MuInfinity { mu: mid, residual: rm, sign_changes });
        }
        if ra * rm < 0.0 {
            b = mid;
        } else {
            a = mid;
            ra = rm;
        }
    }
}

fn ode_rhs(ell: f64, eigen_lambda: f64, alpha: &CoefficientFn, beta_c: f64, fg: f64) -> Result<f64> {
    Ok(fg - (eigen_lambda * alpha.eval(ell, None)? + beta_c) * ell)
}

/// Classical RK4 for `dℓ/dt = (f,g) − (λ·α(ℓ) + β)·ℓ` from `ℓ(0) = ell0`,
/// sampled at `times` (nondecreasing, starting at or after 0). Each interval
/// between output times is split into equal substeps no longer than `dt_ode`.
pub fn eigencase_ode(
    ell0: f64,
    eigen_lambda: f64,
    alpha: &CoefficientFn,
    beta_c: f64,
    fg: f64,
    dt_ode: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    if !(dt_ode > 0.0) {
        return Err(Error::InvalidParameter(format!("dt_ode must be positive, got {dt_ode}")));
    }
    let rhs = |l: f64| ode_rhs(l, eigen_lambda, alpha, beta_c, fg);
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut ell) = (0.0, ell0);
    for &target in times {
        if target < t {
            return Err(Error::InvalidParameter("output times must be nondecreasing".into()));
        }
        let span = target - t;
        let n = (span / dt_ode).ceil() as usize;
        if n > 0 {
            let h = span / n as f64;
            for _ in 0..n {
                let k1 = rhs(ell)?;
                let k2 = rhs(ell + 0.5 * h * k1)?;
                let k3 = rhs(ell + 0.5 * h * k2)?;
                let k4 = rhs(ell + h * k3)?;
                ell += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        t = target;
        out.push(ell);
    }
    Ok(out)
}

/// `|u(t_k) − u_∞|₂` at each snapshot.
pub fn steady_convergence_report(traj: &Trajectory, u_inf: &ScalarField) -> Result<Vec<f64>> {
    traj.snapshots.iter().map(|(_, u)| Ok(l2_norm(&u.difference(u_inf)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{Evolution, SolverParams};
    use crate::functions::{Forcing, GridSpec, SpatialFn, TimeProfile};
    use crate::grid::{build_grid, sample};
    use std::f64::consts::PI;

    fn unit(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(1, &[(0.0, 1.0)], &[n]).unwrap())
    }

    fn problem(n: usize, alpha: CoefficientFn) -> StationaryProblem {
        let g = unit(n);
        StationaryProblem::new(
            ScalarField::constant(g.clone(), 1.0),
            ScalarField::constant(g.clone(), 1.0),
            ScalarField::constant(g.clone(), 1.0),
            alpha,
        )
        .unwrap()
    }

    #[test]
    fn elliptic_zero_forcing() {
        let g = unit(16);
        let p = StationaryProblem::new(
            ScalarField::constant(g.clone(), 1.0),
            ScalarField::zeros(g.clone()),
            ScalarField::constant(g.clone(), 1.0),
            CoefficientFn::Constant { c: 1.0 },
        )
        .unwrap();
        assert!(p.solve_elliptic(2.0).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(p.solve_elliptic(0.0).is_err());
    }

    #[test]
    fn elliptic_matches_closed_form() {
        // -u'' + u = 1, u(0) = u(1) = 0  =>  u = 1 - cosh(x - 1/2)/cosh(1/2)
        let p = problem(128, CoefficientFn::Constant { c: 1.0 });
        let u = p.solve_elliptic(1.0).unwrap();
        let mid = u.values()[63];
        assert!((mid - (1.0 - 1.0 / 0.5_f64.cosh())).abs() < 1e-3);
        assert!((mid - 0.11304).abs() < 1e-3);
        assert!((p.ell(&u) - (1.0 - 2.0 * 0.5_f64.tanh())).abs() < 1e-3);
    }

    #[test]
    fn phi_of_constant_alpha_is_constant() {
        let p = problem(32, CoefficientFn::Constant { c: 1.7 });
        for mu in [0.1, 1.0, 5.0] {
            assert_eq!(p.phi(mu).unwrap(), 1.7);
        }
    }

    #[test]
    fn psi_is_nonnegative_for_nonnegative_data() {
        let p = problem(32, CoefficientFn::RationalBump { a: 0.5, b: 2.0 });
        for mu in [-3.0, 0.0, 0.4, 7.0] {
            assert!(p.psi(mu).unwrap() >= 0.0);
        }
    }

    #[test]
    fn constant_alpha_has_single_root() {
        let p = problem(64, CoefficientFn::Constant { c: 0.8 });
        let res = p.find_fixed_points(16, 1e-12).unwrap();
        assert_eq!(res.roots.len(), 1);
        assert!((res.roots[0].mu - 0.8).abs() <= 1e-10);
        assert_eq!(res.scan_values.len(), 17);
    }

    #[test]
    fn roots_stay_in_alpha_range() {
        let alpha = CoefficientFn::RationalBump { a: 1.0, b: 1.0 };
        let p = problem(64, alpha.clone());
        let res = p.find_fixed_points(32, 1e-10).unwrap();
        assert!(!res.roots.is_empty());
        for r in &res.roots {
            assert!(r.mu >= 1.0 - 1e-9 && r.mu <= 2.0 + 1e-9);
            assert!(r.residual <= 1e-10);
            let nu = p.ell(&r.u_mu);
            assert!((p.psi(nu).unwrap() - nu).abs() <= 1e-9);
        }
        // dense scan oracle: no sign change outside [1, 2]
        for i in 0..=200 {
            let mu = 0.05 + 4.0 * i as f64 / 200.0;
            let s = p.phi(mu).unwrap() - mu;
            if mu < 1.0 {
                assert!(s > 0.0);
            }
            if mu > 2.0 {
                assert!(s < 0.0);
            }
        }
    }

    #[test]
    fn decreasing_phi_gives_one_root() {
        // increasing alpha composed with decreasing ell(u_mu) => phi decreasing
        let p = problem(32, CoefficientFn::ClampedAffine { a: 0.2, b: 20.0, lo: 0.5, hi: 3.0 });
        let res = p.find_fixed_points(40, 1e-10).unwrap();
        let phis: Vec<f64> = res.scan_values.iter().map(|x| x.1).collect();
        assert!(phis.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(res.roots.len(), 1);
    }

    #[test]
    fn mu_infinity_examples() {
        let c = CoefficientFn::Constant { c: 2.0 };
        let m = solve_mu_infinity(5.0, &c, 0.5, 3.0, 1e-14).unwrap();
        assert!((m.mu - 3.0 / (5.0 * 2.0 + 0.5)).abs() < 1e-13);
        let one = CoefficientFn::Constant { c: 1.0 };
        let m = solve_mu_infinity(PI * PI, &one, 1.0, 1.0, 1e-12).unwrap();
        assert!((m.mu - 1.0 / (PI * PI + 1.0)).abs() < 1e-11);
        assert!((m.mu - 0.09199).abs() < 1e-5);
        assert_eq!(m.sign_changes, 1);
        let bump = CoefficientFn::RationalBump { a: 0.3, b: 2.0 };
        let m = solve_mu_infinity(9.0, &bump, 0.7, 2.5, 1e-10).unwrap();
        assert!(m.residual.abs() <= 1e-10 * 2.5);
        assert!(solve_mu_infinity(9.0, &bump, 0.7, 0.0, 1e-10).is_err());
    }

    #[test]
    fn mu_infinity_reports_multiple_roots() {
        // (λα(μ)+β)μ with a dip in α produces three crossings.
        let alpha = CoefficientFn::Table {
            breakpoints: vec![0.0, 0.9, 1.0, 1.1, 2.0],
            values: vec![1.0, 1.0, 0.05, 1.0, 1.0],
        };
        let m = solve_mu_infinity(10.0, &alpha, 0.5, 5.0, 1e-12).unwrap();
        assert!(m.sign_changes >= 3, "{m:?}");
        assert!(m.mu < 0.9);
    }

    #[test]
    fn ode_equilibrium_and_closed_form() {
        let alpha = CoefficientFn::Constant { c: 1.5 };
        let (lam, beta, fg) = (PI * PI, 0.8, 2.0);
        let mu = fg / (lam * 1.5 + beta);
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let eq = eigencase_ode(mu, lam, &alpha, beta, fg, 1e-3, &times).unwrap();
        assert!(eq.iter().all(|&l| (l - mu).abs() < 1e-14));
        let ell0 = 0.01;
        let series = eigencase_ode(ell0, lam, &alpha, beta, fg, 1e-3, &times).unwrap();
        let rate = lam * 1.5 + beta;
        for (t, l) in times.iter().zip(&series) {
            let exact = mu + (ell0 - mu) * (-rate * t).exp();
            assert!((l - exact).abs() <= 1e-8);
        }
    }

    #[test]
    fn ode_increases_toward_root_from_below() {
        let alpha = CoefficientFn::Arctan { a: 1.0, b: 0.3, c: 2.0 };
        let m = solve_mu_infinity(PI * PI, &alpha, 0.5, 1.0, 1e-13).unwrap();
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.025).collect();
        let s = eigencase_ode(0.0, PI * PI, &alpha, 0.5, 1.0, 1e-3, &times).unwrap();
        assert!(s.windows(2).all(|w| w[1] >= w[0]));
        assert!(s[..40].windows(2).all(|w| w[1] > w[0]));
        assert!((s.last().unwrap() - m.mu).abs() < 1e-9);
    }

    fn decaying_spec() -> ProblemSpec {
        ProblemSpec {
            grid: GridSpec::unit_interval(32),
            alpha: CoefficientFn::Constant { c: 1.0 },
            beta: CoefficientFn::RationalBump { a: 1.0, b: 1.0 },
            g: SpatialFn::Constant { value: 1.0 },
            h: TimeProfile::Constant { c: 1.0 },
            f: Forcing::zero(),
            u0: SpatialFn::SineMode { amplitude: 1.0, modes: vec![1] },
            final_time: 4.0,
        }
    }

    #[test]
    fn beta_limit_estimates() {
        let mut spec = decaying_spec();
        spec.beta = CoefficientFn::Constant { c: 2.0 };
        let traj = Evolution::new(&spec).unwrap().run(&SolverParams::new(1e-2, 4.0)).unwrap();
        let (b, conv) = beta_limit_estimate(&traj, &spec).unwrap();
        assert!(conv && b.values().iter().all(|&v| v == 2.0));

        let mut spec = decaying_spec();
        spec.h = TimeProfile::Constant { c: 0.0 };
        let traj = Evolution::new(&spec).unwrap().run(&SolverParams::new(1e-2, 1.0)).unwrap();
        let (b, conv) = beta_limit_estimate(&traj, &spec).unwrap();
        assert!(conv && b.values().iter().all(|&v| v == 2.0));

        // Decaying mode: M(x, ∞) − M(x, T) ≤ sin(πx_j)·c^n/(1 − c)·dt, with c
        // the implicit Euler factor bounded using β ≥ 1.
        let spec = decaying_spec();
        let params = SolverParams::new(1e-2, 4.0);
        let ev = Evolution::new(&spec).unwrap();
        let traj = ev.run(&params).unwrap();
        let (b, conv) = beta_limit_estimate(&traj, &spec).unwrap();
        assert!(conv);
        let lam = ev.grid().discrete_eigenvalue(&[1]);
        let c = 1.0 / (1.0 + 1e-2 * (lam + 1.0));
        let tail = c.powi(400) / (1.0 - c) * 1e-2;
        // β = 1 + 1/(1+s²) has Lipschitz constant 3√3/8.
        let lip = 3.0 * 3.0_f64.sqrt() / 8.0;
        let long = Evolution::new(&ProblemSpec { final_time: 8.0, ..spec.clone() })
            .unwrap()
            .run(&SolverParams::new(1e-2, 8.0))
            .unwrap();
        let (b_long, _) = beta_limit_estimate(&long, &spec).unwrap();
        let d = b.values().iter().zip(b_long.values()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(d <= lip * tail + 1e-12, "{d} vs {}", lip * tail);
    }

    #[test]
    fn convergence_report_at_equilibrium() {
        let spec = ProblemSpec {
            f: Forcing::stationary(SpatialFn::SineMode { amplitude: 2.0, modes: vec![1] }),
            beta: CoefficientFn::Constant { c: 1.0 },
            ..decaying_spec()
        };
        let grid = spec.grid.build().unwrap();
        let lam = grid.discrete_eigenvalue(&[1]);
        let sine = sample(&SpatialFn::SineMode { amplitude: 1.0, modes: vec![1] }, &grid).unwrap();
        let u_inf = sine.scaled(2.0 / (lam + 1.0));
        let ev = Evolution::new(&spec).unwrap().with_initial(u_inf.clone()).unwrap();
        let mut params = SolverParams::new(1e-2, 1.0);
        params.snapshot_stride = 10;
        let traj = ev.run(&params).unwrap();
        let d = steady_convergence_report(&traj, &u_inf).unwrap();
        assert_eq!(d.len(), traj.snapshots.len());
        assert!(d.iter().all(|&v| v <= 1e-6));
    }

    #[test]
    fn convergence_report_decays_for_unforced_problem() {
        let spec = ProblemSpec { beta: CoefficientFn::Constant { c: 1.0 }, ..decaying_spec() };
        let mut params = SolverParams::new(1e-2, 2.0);
        params.snapshot_stride = 20;
        let traj = Evolution::new(&spec).unwrap().run(&params).unwrap();
        let zero = ScalarField::zeros(traj.final_state.u.grid().clone());
        let d = steady_convergence_report(&traj, &zero).unwrap();
        let d0 = d[0];
        // measured rate from the last snapshot, then the bound must hold everywhere
        let (t_last, _) = traj.snapshots.last().unwrap();
        let c = -(d.last().unwrap() / d0).ln() / t_last;
        assert!(c > 0.0);
        for ((t, _), dk) in traj.snapshots.iter().zip(&d) {
            assert!(*dk <= d0 * (-c * t).exp() * (1.0 + 1e-9) + 1e-15);
        }
    }
}
