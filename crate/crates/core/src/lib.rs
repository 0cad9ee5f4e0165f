//! Numerical laboratory for the critical equation `Δu + hu = u⁵` in three dimensions.
//!
//! The Laplacian is the analyst one, `Δ = −Σ ∂²/∂xᵢ²`, in every module. Green
//! functions are stored in the scaled normalization `G(x, y) ~ 1/|x − y|`; the unit
//! normalization differs by the factor `ω₂ = 4π`.
//!
//! Modules, from the bottom up:
//! - [`domain_geometry`]: domains, grids, sphere and volume quadrature.
//! - [`elliptic_core`]: fields, the operator `Δ + h`, linear solves, eigenvalue and
//!   shooting solvers.
//! - [`green`]: Green functions of `Δ + h` and their mass expansions.
//! - [`pohozaev`]: the structural condition and the Pohožaev identities.
//! - [`bubble_analysis`]: the standard bubble, spherical profiles and concentration points.
//! - [`blowup_constructor`]: explicit blowing-up families and their residual potentials.

pub mod blowup_constructor;
pub mod bubble_analysis;
pub mod domain_geometry;
pub mod elliptic_core;
pub mod error;
pub mod green;
pub mod jet;
pub mod pohozaev;
pub mod vec3;

pub use error::Error;

/// Area of the unit 2-sphere.
pub const OMEGA2: f64 = 4.0 * std::f64::consts::PI;
