//! Serializable coefficient families for the diffusion (`alpha`) and
//! reaction (`beta`) nonlinearities, time profiles for the memory weight and
//! forcing, spatial data descriptors, and the exponential gauge shift.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid};

/// Continuous bounded scalar function of one real argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientFn {
    Constant { c: f64 },
    /// `clamp(a + b·s, lo, hi)`
    ClampedAffine { a: f64, b: f64, lo: f64, hi: f64 },
    /// `a + b / (1 + s²)`
    RationalBump { a: f64, b: f64 },
    /// `a + b·atan(c·s)`
    Arctan { a: f64, b: f64, c: f64 },
    /// Linear interpolation, constant beyond the first and last breakpoints.
    Table { breakpoints: Vec<f64>, values: Vec<f64> },
    /// `inner(e^{rate·t}·s)`; needs a time argument.
    ScaledArg { inner: Box<CoefficientFn>, rate: f64 },
}

fn interpolate(breakpoints: &[f64], values: &[f64], x: f64) -> f64 {
    let last = breakpoints.len() - 1;
    if x <= breakpoints[0] {
        return values[0];
    }
    if x >= breakpoints[last] {
        return values[last];
    }
    // first breakpoint strictly greater than x
    let k = breakpoints.partition_point(|&b| b <= x);
    let (x0, x1) = (breakpoints[k - 1], breakpoints[k]);
    let w = (x - x0) / (x1 - x0);
    values[k - 1] + w * (values[k] - values[k - 1])
}

fn check_table(breakpoints: &[f64], values: &[f64]) -> Result<()> {
    if breakpoints.is_empty() || breakpoints.len() != values.len() {
        return Err(Error::InvalidParameter(
            "table needs equally many (at least one) breakpoints and values".into(),
        ));
    }
    if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("table breakpoints must be strictly increasing".into()));
    }
    if breakpoints.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("table entries must be finite".into()));
    }
    Ok(())
}

fn check_finite(name: &str, vals: &[f64]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name}: parameters must be finite")))
    }
}

impl CoefficientFn {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { c } => check_finite("constant", &[*c]),
            Self::ClampedAffine { a, b, lo, hi } => {
                check_finite("clamped_affine", &[*a, *b, *lo, *hi])?;
                if lo > hi {
                    return Err(Error::InvalidParameter(format!("clamped_affine: lo {lo} > hi {hi}")));
                }
                Ok(())
            }
            Self::RationalBump { a, b } => check_finite("rational_bump", &[*a, *b]),
            Self::Arctan { a, b, c } => check_finite("arctan", &[*a, *b, *c]),
            Self::Table { breakpoints, values } => check_table(breakpoints, values),
            Self::ScaledArg { inner, rate } => {
                check_finite("scaled_arg", &[*rate])?;
                inner.validate()
            }
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Self::ScaledArg { .. })
    }

    /// Evaluates the function at `s`; `t` is required by [`CoefficientFn::ScaledArg`].
    pub fn eval(&self, s: f64, t: Option<f64>) -> Result<f64> {
        Ok(match self {
            Self::Constant { c } => *c,
            Self::ClampedAffine { a, b, lo, hi } => (a + b * s).clamp(*lo, *hi),
            Self::RationalBump { a, b } => a + b / (1.0 + s * s),
            Self::Arctan { a, b, c } => a + b * (c * s).atan(),
            Self::Table { breakpoints, values } => interpolate(breakpoints, values, s),
            Self::ScaledArg { inner, rate } => {
                let t = t.ok_or(Error::MissingTime)?;
                let scaled = (rate * t).exp() * s;
                // exp overflow times s = 0 gives NaN; the argument is then 0.
                let scaled = if scaled.is_nan() { 0.0 } else { scaled };
                inner.eval(scaled, Some(t))?
            }
        })
    }

    /// Tight analytic bounds `(lo, hi)` over the whole real line (the
    /// infimum/supremum, which may only be approached asymptotically).
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Constant { c } => (*c, *c),
            Self::ClampedAffine { a, b, lo, hi } => {
                if *b == 0.0 {
                    let v = a.clamp(*lo, *hi);
                    (v, v)
                } else {
                    (*lo, *hi)
                }
            }
            Self::RationalBump { a, b } => {
                if *b >= 0.0 {
                    (*a, a + b)
                } else {
                    (a + b, *a)
                }
            }
            Self::Arctan { a, b, c } => {
                if *b == 0.0 || *c == 0.0 {
                    (*a, *a)
                } else {
                    (a - b.abs() * FRAC_PI_2, a + b.abs() * FRAC_PI_2)
                }
            }
            Self::Table { values, .. } => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            Self::ScaledArg { inner, .. } => inner.bounds(),
        }
    }

    /// Limit as `s → +∞`.
    pub fn limit_at_infinity(&self) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::ClampedAffine { a, b, lo, hi } => {
                if *b > 0.0 {
                    *hi
                } else if *b < 0.0 {
                    *lo
                } else {
                    a.clamp(*lo, *hi)
                }
            }
            Self::RationalBump { a, .. } => *a,
            Self::Arctan { a, b, c } => a + b * FRAC_PI_2 * if *c == 0.0 { 0.0 } else { c.signum() },
            Self::Table { values, .. } => *values.last().unwrap(),
            // For fixed t the scaled argument still tends to +∞ (e^{rate·t} > 0).
            Self::ScaledArg { inner, .. } => inner.limit_at_infinity(),
        }
    }

    /// The same family with every value raised by `shift`.
    pub fn shifted(&self, shift: f64) -> CoefficientFn {
        match self {
            Self::Constant { c } => Self::Constant { c: c + shift },
            Self::ClampedAffine { a, b, lo, hi } => {
                Self::ClampedAffine { a: a + shift, b: *b, lo: lo + shift, hi: hi + shift }
            }
            Self::RationalBump { a, b } => Self::RationalBump { a: a + shift, b: *b },
            Self::Arctan { a, b, c } => Self::Arctan { a: a + shift, b: *b, c: *c },
            Self::Table { breakpoints, values } => Self::Table {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|v| v + shift).collect(),
            },
            Self::ScaledArg { inner, rate } => {
                Self::ScaledArg { inner: Box::new(inner.shifted(shift)), rate: *rate }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::ClampedAffine { .. } => "clamped_affine",
            Self::RationalBump { .. } => "rational_bump",
            Self::Arctan { .. } => "arctan",
            Self::Table { .. } => "table",
            Self::ScaledArg { .. } => "scaled_arg",
        }
    }
}

/// Bounded function of time on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant { c: f64 },
    /// `e^{rate·t}·inner(t)`
    ExpScaled { inner: Box<TimeProfile>, rate: f64 },
    Table { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl Default for TimeProfile {
    fn default() -> Self {
        TimeProfile::Constant { c: 1.0 }
    }
}

impl TimeProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { c } => check_finite("constant", &[*c]),
            Self::ExpScaled { inner, rate } => {
                check_finite("exp_scaled", &[*rate])?;
                inner.validate()
            }
            Self::Table { breakpoints, values } => check_table(breakpoints, values),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::ExpScaled { inner, rate } => (rate * t).exp() * inner.eval(t),
            Self::Table { breakpoints, values } => interpolate(breakpoints, values, t),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            Self::Constant { c } => *c >= 0.0,
            Self::ExpScaled { inner, .. } => inner.is_nonnegative(),
            Self::Table { values, .. } => values.iter().all(|&v| v >= 0.0),
        }
    }

    /// Upper bound of `|p(t)|` on `[0, t_end]`.
    pub fn sup_abs(&self, t_end: f64) -> f64 {
        match self {
            Self::Constant { c } => c.abs(),
            Self::ExpScaled { inner, rate } => (rate * t_end).exp().max(1.0) * inner.sup_abs(t_end),
            Self::Table { values, .. } => values.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        }
    }
}

/// Spatial data (`g`, `u0`, the spatial part of `f`, `β_∞`), evaluated at
/// interior node coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialFn {
    Constant { value: f64 },
    /// `amplitude·Π sin(k·π·(x - lo)/(hi - lo))`; the extents are supplied at
    /// evaluation time through the grid.
    SineMode {
        amplitude: f64,
        #[serde(default = "default_modes")]
        modes: Vec<u32>,
    },
    /// `amplitude·Π (x - lo)(hi - x)`
    Parabola { amplitude: f64 },
    Gaussian { amplitude: f64, center: Vec<f64>, width: f64 },
    Sum { terms: Vec<SpatialFn> },
    /// Explicit nodal values in grid order.
    Values { values: Vec<f64> },
}

fn default_modes() -> Vec<u32> {
    vec![1]
}

impl SpatialFn {
    /// Evaluates at a physical point of the domain with the given per-axis
    /// extents. `Values` carries nodal data only and yields NaN here.
    pub fn eval(&self, x: &[f64], extents: &[(f64, f64)]) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::SineMode { amplitude, modes } => {
                amplitude
                    * x.iter()
                        .zip(extents)
                        .enumerate()
                        .map(|(axis, (&xi, &(lo, hi)))| {
                            let k = modes.get(axis).or(modes.last()).copied().unwrap_or(1) as f64;
                            (k * PI * (xi - lo) / (hi - lo)).sin()
                        })
                        .product::<f64>()
            }
            Self::Parabola { amplitude } => {
                amplitude * x.iter().zip(extents).map(|(&xi, &(lo, hi))| (xi - lo) * (hi - xi)).product::<f64>()
            }
            Self::Gaussian { amplitude, center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                amplitude * (-r2 / (width * width)).exp()
            }
            Self::Sum { terms } => terms.iter().map(|t| t.eval(x, extents)).sum(),
            Self::Values { .. } => f64::NAN,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::Constant { value } => check_finite("constant", &[*value]),
            Self::SineMode { amplitude, modes } => {
                check_finite("sine_mode", &[*amplitude])?;
                if modes.is_empty() || modes.contains(&0) {
                    return Err(Error::InvalidParameter("sine_mode: modes must be positive".into()));
                }
                Ok(())
            }
            Self::Parabola { amplitude } => check_finite("parabola", &[*amplitude]),
            Self::Gaussian { amplitude, center, width } => {
                check_finite("gaussian", &[*amplitude, *width])?;
                check_finite("gaussian", center)?;
                if center.len() != dim || !(*width > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian: need a {dim}-dimensional center and positive width"
                    )));
                }
                Ok(())
            }
            Self::Sum { terms } => terms.iter().try_for_each(|t| t.validate(dim)),
            Self::Values { values } => check_finite("values", values),
        }
    }
}

/// Forcing `f(x, t) = ρ(t)·F(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Forcing {
    pub space: SpatialFn,
    #[serde(default)]
    pub time: TimeProfile,
}

impl Forcing {
    pub fn zero() -> Self {
        Forcing { space: SpatialFn::Constant { value: 0.0 }, time: TimeProfile::default() }
    }

    pub fn stationary(space: SpatialFn) -> Self {
        Forcing { space, time: TimeProfile::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub extents: Vec<[f64; 2]>,
    pub n_cells: Vec<usize>,
}

impl GridSpec {
    pub fn unit_interval(n_cells: usize) -> Self {
        GridSpec { extents: vec![[0.0, 1.0]], n_cells: vec![n_cells] }
    }

    pub fn unit_square(n_cells: usize) -> Self {
        GridSpec { extents: vec![[0.0, 1.0]; 2], n_cells: vec![n_cells; 2] }
    }

    pub fn build(&self) -> Result<Arc<Grid>> {
        let extents: Vec<(f64, f64)> = self.extents.iter().map(|e| (e[0], e[1])).collect();
        Ok(Arc::new(build_grid(self.extents.len(), &extents, &self.n_cells)?))
    }
}

/// Complete data set of the evolution problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub grid: GridSpec,
    pub alpha: CoefficientFn,
    pub beta: CoefficientFn,
    #[serde(default = "unit_constant")]
    pub g: SpatialFn,
    #[serde(default)]
    pub h: TimeProfile,
    #[serde(default = "Forcing::zero")]
    pub f: Forcing,
    pub u0: SpatialFn,
    pub final_time: f64,
}

fn unit_constant() -> SpatialFn {
    SpatialFn::Constant { value: 1.0 }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let dim = self.grid.extents.len();
        self.grid.build()?;
        self.alpha.validate()?;
        self.beta.validate()?;
        self.h.validate()?;
        self.f.time.validate()?;
        for (name, d) in [("g", &self.g), ("u0", &self.u0), ("f.space", &self.f.space)] {
            d.validate(dim).map_err(|e| Error::InvalidParameter(format!("{name}: {e}")))?;
        }
        let (alpha_lo, _) = self.alpha.bounds();
        if !(alpha_lo > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be bounded below by a positive constant, lower bound is {alpha_lo}"
            )));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::InvalidParameter(format!("final_time must be positive, got {}", self.final_time)));
        }
        Ok(())
    }
}

/// Smallest rate that lifts `beta` to at least 1.
pub fn auto_gauge_lambda(beta: &CoefficientFn) -> f64 {
    (1.0 - beta.bounds().0).max(0.0)
}

/// Rewrites the problem for `ũ = e^{-λt}·u`: `f ← e^{-λt} f`,
/// `h ← e^{λt} h`, `α ← α(e^{λt}·)`, `β ← β + λ`.
pub fn gauge_shift(spec: &ProblemSpec, gauge_lambda: f64) -> Result<ProblemSpec> {
    if !(gauge_lambda >= 0.0 && gauge_lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("gauge rate must be >= 0, got {gauge_lambda}")));
    }
    if gauge_lambda == 0.0 {
        return Ok(spec.clone());
    }
    let mut out = spec.clone();
    out.f.time = TimeProfile::ExpScaled { inner: Box::new(spec.f.time.clone()), rate: -gauge_lambda };
    out.h = TimeProfile::ExpScaled { inner: Box::new(spec.h.clone()), rate: gauge_lambda };
    out.alpha = CoefficientFn::ScaledArg { inner: Box::new(spec.alpha.clone()), rate: gauge_lambda };
    out.beta = spec.beta.shifted(gauge_lambda);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<CoefficientFn> {
        vec![
            CoefficientFn::Constant { c: 2.0 },
            CoefficientFn::ClampedAffine { a: 0.5, b: 2.0, lo: 0.2, hi: 3.0 },
            CoefficientFn::ClampedAffine { a: 0.5, b: -0.1, lo: -1.0, hi: 1.0 },
            CoefficientFn::RationalBump { a: 1.0, b: 1.0 },
            CoefficientFn::RationalBump { a: 2.0, b: -0.5 },
            CoefficientFn::Arctan { a: 1.0, b: 2.0 / PI, c: 1.0 },
            CoefficientFn::Arctan { a: 3.0, b: 0.3, c: -4.0 },
            CoefficientFn::Table { breakpoints: vec![-1.0, 0.0, 2.0], values: vec![1.0, 3.0, 0.5] },
        ]
    }

    #[test]
    fn eval_examples() {
        assert_eq!(CoefficientFn::Constant { c: 2.0 }.eval(17.0, None).unwrap(), 2.0);
        let bump = CoefficientFn::RationalBump { a: 1.0, b: 1.0 };
        assert_eq!(bump.eval(0.0, None).unwrap(), 2.0);
        assert!((bump.eval(1e8, None).unwrap() - 1.0).abs() < 1e-15);
        let scaled = CoefficientFn::ScaledArg { inner: Box::new(CoefficientFn::Constant { c: 0.7 }), rate: 3.0 };
        assert_eq!(scaled.eval(5.0, Some(2.0)).unwrap(), 0.7);
        assert!(matches!(scaled.eval(5.0, None), Err(Error::MissingTime)));
    }

    #[test]
    fn bounds_examples() {
        assert_eq!(CoefficientFn::Constant { c: 2.0 }.bounds(), (2.0, 2.0));
        assert_eq!(CoefficientFn::RationalBump { a: 1.0, b: 1.0 }.bounds(), (1.0, 2.0));
        let (lo, hi) = CoefficientFn::Arctan { a: 1.0, b: 2.0 / PI, c: 1.0 }.bounds();
        assert!(lo.abs() < 1e-15 && (hi - 2.0).abs() < 1e-15);
    }

    #[test]
    fn limit_examples() {
        assert_eq!(CoefficientFn::Constant { c: 4.5 }.limit_at_infinity(), 4.5);
        assert_eq!(CoefficientFn::RationalBump { a: 0.3, b: 7.0 }.limit_at_infinity(), 0.3);
        assert_eq!(CoefficientFn::ClampedAffine { a: 0.0, b: 1.0, lo: -2.0, hi: 5.0 }.limit_at_infinity(), 5.0);
    }

    #[test]
    fn eval_stays_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for f in families() {
            let (lo, hi) = f.bounds();
            for i in 0..10_000 {
                // dense coverage of [-1e6, 1e6] plus a concentration near 0
                let s = if i % 2 == 0 { rng.gen_range(-1e6..1e6) } else { rng.gen_range(-5.0..5.0) };
                let v = f.eval(s, None).unwrap();
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{} at {s}: {v} not in [{lo}, {hi}]", f.name());
            }
        }
    }

    #[test]
    fn discrepancy_to_limit_is_nonincreasing() {
        for f in families() {
            let lim = f.limit_at_infinity();
            let d: Vec<f64> = [1e3, 1e4, 1e5].iter().map(|&s| (f.eval(s, None).unwrap() - lim).abs()).collect();
            assert!(d[1] <= d[0] && d[2] <= d[1], "{}: {d:?}", f.name());
        }
    }

    #[test]
    fn table_interpolates() {
        let t = CoefficientFn::Table { breakpoints: vec![0.0, 1.0, 3.0], values: vec![1.0, 2.0, 0.0] };
        assert_eq!(t.eval(-5.0, None).unwrap(), 1.0);
        assert_eq!(t.eval(0.5, None).unwrap(), 1.5);
        assert_eq!(t.eval(1.0, None).unwrap(), 2.0);
        assert_eq!(t.eval(2.0, None).unwrap(), 1.0);
        assert_eq!(t.eval(9.0, None).unwrap(), 0.0);
        let bad = CoefficientFn::Table { breakpoints: vec![0.0, 0.0], values: vec![1.0, 2.0] };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn families_roundtrip_through_toml_names() {
        let src = r#"kind = "rational_bump"
a = 1.0
b = 0.5
"#;
        let f: CoefficientFn = toml::from_str(src).unwrap();
        assert_eq!(f, CoefficientFn::RationalBump { a: 1.0, b: 0.5 });
        let typo = "kind = \"arctan\"\na = 1.0\nb = 1.0\nc = 1.0\nd = 2.0\n";
        assert!(toml::from_str::<CoefficientFn>(typo).is_err());
    }

    fn sample_spec() -> ProblemSpec {
        ProblemSpec {
            grid: GridSpec::unit_interval(8),
            alpha: CoefficientFn::RationalBump { a: 1.0, b: 1.0 },
            beta: CoefficientFn::Constant { c: 0.0 },
            g: SpatialFn::Constant { value: 1.0 },
            h: TimeProfile::Constant { c: 1.0 },
            f: Forcing::stationary(SpatialFn::Constant { value: 1.0 }),
            u0: SpatialFn::Parabola { amplitude: 1.0 },
            final_time: 1.0,
        }
    }

    #[test]
    fn gauge_shift_examples() {
        let spec = sample_spec();
        assert_eq!(gauge_shift(&spec, 0.0).unwrap(), spec);
        let lambda = auto_gauge_lambda(&spec.beta);
        assert_eq!(lambda, 1.0);
        let shifted = gauge_shift(&spec, lambda).unwrap();
        assert_eq!(shifted.beta, CoefficientFn::Constant { c: 1.0 });
        assert_eq!(shifted.u0, spec.u0);
        assert!((shifted.f.time.eval(2.0) - (-2.0_f64).exp()).abs() < 1e-15);
        assert!((shifted.h.eval(2.0) - 2.0_f64.exp()).abs() < 1e-12);
        // alpha(e^{λt}·s)
        let a = shifted.alpha.eval(0.5, Some(1.0)).unwrap();
        let expected = spec.alpha.eval(0.5 * 1.0_f64.exp(), None).unwrap();
        assert_eq!(a, expected);
        assert!(gauge_shift(&spec, -1.0).is_err());
    }

    #[test]
    fn auto_gauge_is_noop_when_beta_large() {
        assert_eq!(auto_gauge_lambda(&CoefficientFn::Constant { c: 3.0 }), 0.0);
        let b = CoefficientFn::Arctan { a: 0.0, b: 1.0, c: 1.0 };
        let l = auto_gauge_lambda(&b);
        assert!((b.shifted(l).bounds().0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn problem_validation() {
        let mut spec = sample_spec();
        spec.validate().unwrap();
        spec.alpha = CoefficientFn::Arctan { a: 0.0, b: 1.0, c: 1.0 };
        assert!(spec.validate().is_err());
        let mut spec = sample_spec();
        spec.final_time = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn time_profile_sup_bound_dominates_samples() {
        let p = TimeProfile::ExpScaled {
            inner: Box::new(TimeProfile::Table { breakpoints: vec![0.0, 1.0], values: vec![-2.0, 1.0] }),
            rate: 0.7,
        };
        let sup = p.sup_abs(3.0);
        for k in 0..=3000 {
            assert!(p.eval(k as f64 * 1e-3).abs() <= sup + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn shifted_family_raises_values(s in -1e3f64..1e3, shift in 0.0f64..10.0) {
            for f in families() {
                let a = f.eval(s, None).unwrap();
                let b = f.shifted(shift).eval(s, None).unwrap();
                prop_assert!((b - a - shift).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
