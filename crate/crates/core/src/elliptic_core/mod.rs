//! Discretizations of `Δ + h` with the analyst sign, linear solves, coercivity tests and
//! the radial shooting solver for `Δu + hu = u⁵`.

mod coefficient;
mod eigen;
mod fields;
pub mod ode;
mod operators;
mod shooting;

pub use coefficient::CoefficientH;
pub use eigen::{coercivity_check, CoercivityOptions, CoercivityReport, EigenMethod, SOBOLEV_CONSTANT};
pub use fields::{ScalarField3D, ScalarFieldRadial};
pub use operators::{
    apply_laplacian_3d, apply_laplacian_radial, laplacian_7pt, solve_dirichlet, solve_dirichlet_on,
    solve_dirichlet_radial, SolverOptions, SolveStats,
};
pub use shooting::{find_radial_solution, radial_shoot, RadialSearch, SearchOptions, ShootOptions, ShootResult};

use thiserror::Error;

use crate::domain_geometry::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EllipticError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("operator is not positive definite (curvature {0:.3e} along a search direction)")]
    IndefiniteSystem(f64),
    #[error("iteration limit {iterations} reached with relative residual {residual:.3e}")]
    IterationLimit { iterations: usize, residual: f64 },
    #[error("evaluation at r = {r} below the first node {first}")]
    Extrapolation { r: f64, first: f64 },
    #[error("coefficient is not radial")]
    NotRadial,
    #[error("eigenvalue iteration failed: {0}")]
    Eigen(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("ODE step size underflow at t = {0}")]
    StepUnderflow(f64),
}
