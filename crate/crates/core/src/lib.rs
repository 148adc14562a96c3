//! Finite-difference solvers for a parabolic equation whose diffusion
//! coefficient depends on a spatial average of the solution and whose
//! reaction coefficient depends on its time history:
//!
//! ```text
//! u_t − α(∫ g u dx) Δu + β(∫₀ᵗ h u ds) u = f   in Ω × (0, T)
//! u = 0 on ∂Ω,  u(·, 0) = u0
//! ```
//!
//! plus the stationary problem reached as `t → ∞`, reduced to scalar
//! fixed-point equations in the diffusion parameter.

pub mod cli;
pub mod eigencase;
pub mod error;
pub mod evolution;
pub mod functions;
pub mod grid;
pub mod sparse;
pub mod stationary;
pub mod validation;

pub use error::{Error, Result};
pub use evolution::{Evolution, EvolutionState, Horizon, SolverParams, Trajectory};
pub use functions::{gauge_shift, CoefficientFn, Forcing, GridSpec, ProblemSpec, SpatialFn, TimeProfile};
pub use grid::{build_grid, integrate_product, l2_norm, laplacian_matrix, linf_norm, sample, Grid, ScalarField};
pub use sparse::{cg_solve, CgReport, SparseMatrix};
pub use stationary::{FixedPointResult, StationaryProblem};
