//! Dirichlet Green functions of `Δ + h` and their expansions at the source,
//!
//! `G(x, y) = 1/|x − y| + ½h(x)|x − y| + γₓ(y)`,
//!
//! in the scaled normalization `Δ_y G + hG = ω₂ δₓ`. The mass is `m = γₓ(x)` and the
//! regular part `γₓ` is `C¹` at the source.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain_geometry::{Domain, GeometryError, Grid3D, RadialGrid, SphereRule};
use crate::elliptic_core::ode::{integrate, OdeOptions};
use crate::elliptic_core::{
    coercivity_check, solve_dirichlet_on, CoefficientH, CoercivityOptions, EigenMethod, EllipticError, ScalarField3D,
    ScalarFieldRadial, SolverOptions,
};
use crate::jet::Jet;
use crate::vec3::{self, Point};
use crate::OMEGA2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("Green function evaluated at its source {0:?}")]
    Singularity(Point),
    #[error("operator Δ + h is not coercive (smallest eigenvalue {0:.6e})")]
    NotCoercive(f64),
    #[error("source at distance {dist:.4e} from the boundary, need more than {need:.4e}")]
    SourceTooClose { dist: f64, need: f64 },
    #[error("expansion fit residual {residual:.3e} above tolerance {tolerance:.3e}")]
    FitResidual { residual: f64, tolerance: f64 },
    #[error("expansions use mixed normalizations")]
    NormalizationMismatch,
    #[error("invalid input: {0}")]
    Input(String),
}

/// `Scaled`: `G ~ 1/|x − y|`. `Unit`: `𝒢 ~ 1/(ω₂|x − y|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    Scaled,
    Unit,
}

impl Normalization {
    /// Factor taking scaled values to this normalization.
    pub fn factor(self) -> f64 {
        match self {
            Self::Scaled => 1.0,
            Self::Unit => 1.0 / OMEGA2,
        }
    }
}

/// Expansion data of a Green function at its source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenExpansion {
    pub source: Point,
    /// `γₓ(x)`.
    pub mass: f64,
    /// `∇γₓ(x)`.
    pub grad_regular: Point,
    pub h_at_source: f64,
    pub normalization: Normalization,
    /// RMS residual of the shell fit.
    pub fit_residual: f64,
    /// Largest fit residual on each shell, from the outermost shell inward.
    #[serde(default)]
    pub shell_residuals: Vec<f64>,
}

impl GreenExpansion {
    /// The same expansion in normalization `to`.
    pub fn convert(&self, to: Normalization) -> Self {
        let s = to.factor() / self.normalization.factor();
        Self {
            mass: self.mass * s,
            grad_regular: vec3::scale(self.grad_regular, s),
            fit_residual: self.fit_residual * s,
            shell_residuals: self.shell_residuals.iter().map(|r| r * s).collect(),
            normalization: to,
            ..self.clone()
        }
    }
}

/// `G(x, y)` for `h ≡ 0` on the unit ball by the method of images (scaled normalization).
pub fn laplace_green_ball(x: Point, y: Point) -> Result<f64, GreenError> {
    if vec3::norm(x) >= 1.0 {
        return Err(GeometryError::OutsideDomain(x).into());
    }
    if vec3::norm(y) > 1.0 + 1e-14 {
        return Err(GeometryError::OutsideDomain(y).into());
    }
    if x == y {
        return Err(GreenError::Singularity(x));
    }
    Ok(1.0 / vec3::dist(x, y) + image_term(x, y, 1.0).0)
}

/// Image part `−R/√(R⁴ − 2R²⟨x,y⟩ + |x|²|y|²)` and its `y`-gradient.
fn image_term(x: Point, y: Point, r: f64) -> (f64, Point) {
    let r2 = r * r;
    let d = r2 * r2 - 2.0 * r2 * vec3::dot(x, y) + vec3::norm2(x) * vec3::norm2(y);
    let s = d.sqrt();
    let g = vec3::scale(vec3::axpy(vec3::scale(x, -r2), vec3::norm2(x), y), r / (d * s));
    (-r / s, g)
}

#[derive(Debug, Clone)]
enum Repr {
    /// `h ≡ 0` on a ball: closed form.
    Images { radius: f64 },
    /// Source at the origin: `G = 1/r + w(r)`.
    Radial { w: ScalarFieldRadial },
    /// `G = S + β` with the analytic singular part `S` and a grid correction `β`.
    Grid { correction: ScalarField3D, images_radius: Option<f64> },
}

/// `G(x, ·)` for a fixed source, stored in the scaled normalization.
#[derive(Debug, Clone)]
pub struct GreenField {
    pub source: Point,
    pub h: CoefficientH,
    pub h_at_source: f64,
    repr: Repr,
}

impl GreenField {
    /// Closed-form Green function of `Δ` on the ball of radius `radius`.
    pub fn images(source: Point, radius: f64) -> Result<Self, GreenError> {
        if vec3::norm(source) >= radius {
            return Err(GeometryError::OutsideDomain(source).into());
        }
        Ok(Self { source, h: CoefficientH::zero(), h_at_source: 0.0, repr: Repr::Images { radius } })
    }

    pub fn normalization(&self) -> Normalization {
        Normalization::Scaled
    }

    /// Whether values come from a closed form rather than a discretization.
    pub fn is_closed_form(&self) -> bool {
        matches!(self.repr, Repr::Images { .. })
    }

    /// Whether [`GreenField::regular`] is exact at the source, so the mass and
    /// gradient need no shell fit.
    pub fn has_exact_regular(&self) -> bool {
        matches!(self.repr, Repr::Images { .. } | Repr::Radial { .. })
    }

    /// `(γₓ(y), ∇γₓ(y))`; smooth through the source.
    pub fn regular(&self, y: Point) -> (f64, Point) {
        let x = self.source;
        match &self.repr {
            Repr::Images { radius } => image_term(x, y, *radius),
            Repr::Radial { w } => {
                let r = vec3::norm(y);
                let half = 0.5 * self.h_at_source;
                let v = w.value(r) - half * r;
                let d = w.deriv(r) - half;
                let g = if r > 0.0 { vec3::scale(y, d / r) } else { [0.0; 3] };
                (v, g)
            }
            Repr::Grid { correction, images_radius } => {
                let (mut v, mut g) = correction.value_and_grad(y);
                if let Some(rad) = images_radius {
                    let (iv, ig) = image_term(x, y, *rad);
                    v += iv;
                    g = vec3::add(g, ig);
                }
                (v, g)
            }
        }
    }

    /// `(G(x, y), ∇_y G(x, y))` for `y ≠ x`.
    pub fn value_and_grad(&self, y: Point) -> (f64, Point) {
        let z = vec3::sub(y, self.source);
        let r = vec3::norm(z);
        let (gv, gg) = self.regular(y);
        let half = 0.5 * self.h_at_source;
        let v = 1.0 / r + half * r + gv;
        let g = vec3::add(vec3::scale(z, -1.0 / (r * r * r) + half / r), gg);
        (v, g)
    }

    pub fn value(&self, y: Point) -> f64 {
        self.value_and_grad(y).0
    }

    /// Value in normalization `n`.
    pub fn value_in(&self, y: Point, n: Normalization) -> f64 {
        self.value(y) * n.factor()
    }

    /// Jet of `G(x, ·)` at `y ≠ x`, with the Laplacian taken from `ΔG = −hG`.
    pub fn jet(&self, y: Point) -> Jet {
        let (v, g) = self.value_and_grad(y);
        Jet::new(v, g, -self.h.eval(y) * v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Outer shell radius as a fraction of the distance to the boundary.
    pub outer_fraction: f64,
    pub shells: usize,
    /// Directions per shell: Gauss–Legendre in `cos θ` times uniform in `φ`.
    pub n_theta: usize,
    pub n_phi: usize,
    /// Accepted RMS residual relative to `max(|m|, 1)`.
    pub relative_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { outer_fraction: 0.05, shells: 5, n_theta: 4, n_phi: 8, relative_tolerance: 5e-2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenOptions {
    pub solver: SolverOptions,
    /// Use the 1D path for a source at the origin with radial `h` on a ball.
    pub radial_fast_path: bool,
    /// Subtract the `h ≡ 0` image term on balls before solving for the correction.
    pub subtract_images: bool,
    /// Check coercivity before solving.
    pub check_coercivity: bool,
    /// Uniform nodes of the radial path beyond its geometric cluster.
    pub radial_nodes: usize,
    pub ode: OdeOptions,
}

impl Default for GreenOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions { spacing: 1.0 / 32.0, tolerance: 1e-11, max_iterations: 20_000 },
            radial_fast_path: true,
            subtract_images: true,
            check_coercivity: true,
            radial_nodes: 4000,
            ode: OdeOptions { atol: 1e-13, rtol: 1e-12, ..OdeOptions::default() },
        }
    }
}

/// Solves for `G(x, ·)` with `Δ_y G + hG = ω₂ δₓ`, `G = 0` on `∂Ω`.
pub fn solve_green(h: &CoefficientH, x: Point, domain: &Domain, opts: &GreenOptions) -> Result<GreenField, GreenError> {
    if !domain.contains(x) {
        return Err(GeometryError::OutsideDomain(x).into());
    }
    if opts.check_coercivity {
        check_coercive(h, domain, opts.solver.spacing)?;
    }
    let h_x = h.eval(x);
    if let (true, true, Some(radius)) = (opts.radial_fast_path, h.is_radial() && vec3::norm(x) == 0.0, domain.ball_radius()) {
        let w = radial_regular_part(h, radius, opts)?;
        return Ok(GreenField { source: x, h: h.clone(), h_at_source: h_x, repr: Repr::Radial { w } });
    }
    let spacing = opts.solver.spacing;
    let dist = domain.dist_to_boundary(x);
    if dist <= 2.0 * spacing {
        return Err(GreenError::SourceTooClose { dist, need: 2.0 * spacing });
    }
    let images_radius = if opts.subtract_images { domain.ball_radius() } else { None };
    let grid = Arc::new(Grid3D::new(domain, spacing)?);
    let hc = h.clone();
    // (Δ + h)β = −h·H − (h − h(x))/|z| − ½h·h(x)|z|, H the image term when subtracted
    let rhs = move |y: Point| {
        let z = vec3::sub(y, x);
        let r = vec3::norm(z);
        let hy = hc.eval(y);
        let img = images_radius.map_or(0.0, |rad| image_term(x, y, rad).0);
        let jump = if r > 0.0 { (hy - h_x) / r } else { 0.0 };
        -hy * img - jump - 0.5 * hy * h_x * r
    };
    // on ∂Ω: β = −S, with S = 1/|z| + ½h(x)|z| (+ H on balls, where 1/|z| + H = 0)
    let boundary = move |y: Point| {
        let r = vec3::dist(y, x);
        match images_radius {
            Some(_) => -0.5 * h_x * r,
            None => -1.0 / r - 0.5 * h_x * r,
        }
    };
    let (correction, _) = solve_dirichlet_on(grid, h, &rhs, Some(&boundary), &opts.solver)?;
    Ok(GreenField { source: x, h: h.clone(), h_at_source: h_x, repr: Repr::Grid { correction, images_radius } })
}

fn check_coercive(h: &CoefficientH, domain: &Domain, spacing: f64) -> Result<(), GreenError> {
    let radial = h.is_radial() && domain.ball_radius().is_some();
    let nonneg = match h {
        CoefficientH::Constant(c) => *c >= 0.0,
        CoefficientH::RadialPolynomial(c) => c.iter().all(|&a| a >= 0.0),
        _ => false,
    };
    if nonneg {
        return Ok(());
    }
    let method = if radial { EigenMethod::Radial { intervals: 4000 } } else { EigenMethod::Lanczos { spacing, steps: 300 } };
    let rep = coercivity_check(h, domain, &CoercivityOptions { method, ..Default::default() })?;
    if rep.coercive {
        Ok(())
    } else {
        Err(GreenError::NotCoercive(rep.smallest_eigenvalue))
    }
}

/// `w = G − 1/r` for a source at the origin: `w″ + 2w′/r = hw + h/r`, `w(R) = −1/R`,
/// written as `w = w_p + c·w_h` with `w_p ~ ½h(0)r` and `w_h(0) = 1`.
fn radial_regular_part(h: &CoefficientH, radius: f64, opts: &GreenOptions) -> Result<ScalarFieldRadial, GreenError> {
    let h0 = h.eval_radial(0.0).unwrap();
    let h1 = h.radial_derivative(0.0).unwrap();
    let r_min = 1e-6 * radius;
    let r_switch = 1e-2 * radius;
    let mut nodes: Vec<f64> = (0..=40).map(|i| r_min * (r_switch / r_min).powf(i as f64 / 40.0)).collect();
    let n = opts.radial_nodes.max(10);
    let step = (radius - r_switch) / n as f64;
    nodes.extend((1..=n).map(|i| r_switch + step * i as f64));
    *nodes.last_mut().unwrap() = radius;
    let grid = RadialGrid::new(nodes)?;
    let rs = 1e-3 * r_min;
    let y0 = [0.5 * h0 * rs + h1 * rs * rs / 6.0, 0.5 * h0 + h1 * rs / 3.0, 1.0 + h0 * rs * rs / 6.0, h0 * rs / 3.0];
    let rhs = |r: f64, y: &[f64; 4]| {
        let hr = h.eval_radial(r).unwrap();
        [y[1], hr * (y[0] + 1.0 / r) - 2.0 * y[1] / r, y[3], hr * y[2] - 2.0 * y[3] / r]
    };
    let tr = integrate(rhs, rs, y0, &grid.nodes, &opts.ode)?;
    if tr.diverged_at.is_some() {
        return Err(EllipticError::Input("radial Green integration diverged".into()).into());
    }
    let end = tr.states.last().unwrap();
    let c = -(1.0 / radius + end[0]) / end[2];
    let values = tr.states.iter().map(|s| s[0] + c * s[2]).collect();
    let derivs = tr.states.iter().map(|s| s[1] + c * s[3]).collect();
    Ok(ScalarFieldRadial::from_samples(grid, values, derivs))
}

/// Fits `G(x, x + z) − 1/|z| − ½h(x)|z| ≈ c₀ + ⟨c, z⟩ + q|z|²` over shells
/// `r_k = r₀ 2^{−k}`, `r₀ = outer_fraction·d(x, ∂Ω)`, returning `m = c₀` and `∇γₓ(x) = c`.
///
/// The isotropic `q|z|²` term absorbs the shell average of the second-order part of `γₓ`;
/// the anisotropic part averages out on the symmetric shells.
pub fn extract_expansion(
    gf: &GreenField,
    h: &CoefficientH,
    domain: &Domain,
    opts: &FitOptions,
) -> Result<GreenExpansion, GreenError> {
    let x = gf.source;
    let h_x = h.eval(x);
    let r0 = opts.outer_fraction * domain.dist_to_boundary(x);
    if !(r0 > 0.0) {
        return Err(GeometryError::OutsideDomain(x).into());
    }
    let rule = SphereRule::new(opts.n_theta, opts.n_phi);
    let mut samples = Vec::with_capacity(opts.shells * rule.points.len());
    for k in 0..opts.shells {
        let rk = r0 * 0.5f64.powi(k as i32);
        for &d in &rule.points {
            let z = vec3::scale(d, rk);
            let f = gf.value(vec3::add(x, z)) - 1.0 / rk - 0.5 * h_x * rk;
            samples.push((k, z, f));
        }
    }
    // normal equations for (c₀, c), each shell weighted equally
    let mut a = [[0.0; 5]; 5];
    let mut b = [0.0; 5];
    for &(_, z, f) in &samples {
        let phi = [1.0, z[0], z[1], z[2], vec3::norm2(z)];
        for i in 0..5 {
            b[i] += phi[i] * f;
            for j in 0..5 {
                a[i][j] += phi[i] * phi[j];
            }
        }
    }
    let c = solve_small(a, b).ok_or_else(|| GreenError::Input("singular fit system".into()))?;
    let mut shell_residuals = vec![0.0f64; opts.shells];
    let mut ss = 0.0;
    for &(k, z, f) in &samples {
        let e = f - c[0] - c[1] * z[0] - c[2] * z[1] - c[3] * z[2] - c[4] * vec3::norm2(z);
        ss += e * e;
        shell_residuals[k] = shell_residuals[k].max(e.abs());
    }
    let fit_residual = (ss / samples.len() as f64).sqrt();
    let tolerance = opts.relative_tolerance * c[0].abs().max(1.0);
    if !(fit_residual <= tolerance) {
        return Err(GreenError::FitResidual { residual: fit_residual, tolerance });
    }
    Ok(GreenExpansion {
        source: x,
        mass: c[0],
        grad_regular: [c[1], c[2], c[3]],
        h_at_source: h_x,
        normalization: Normalization::Scaled,
        fit_residual,
        shell_residuals,
    })
}

/// Gaussian elimination with partial pivoting.
fn solve_small<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for i in (0..N).rev() {
        let s: f64 = (i + 1..N).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Masses at sample points, with the index of the most negative one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassScan {
    pub entries: Vec<(Point, f64)>,
    pub most_negative: usize,
}

/// Solves and fits the Green function at each sample point.
pub fn mass_sign_scan(
    h: &CoefficientH,
    domain: &Domain,
    points: &[Point],
    opts: &GreenOptions,
    fit: &FitOptions,
) -> Result<MassScan, GreenError> {
    if points.is_empty() {
        return Err(GreenError::Input("no sample points".into()));
    }
    let mut entries = Vec::with_capacity(points.len());
    for &p in points {
        let gf = solve_green(h, p, domain, opts)?;
        let e = extract_expansion(&gf, h, domain, fit)?;
        entries.push((p, e.mass));
    }
    let most_negative = (0..entries.len()).min_by(|&i, &j| entries[i].1.total_cmp(&entries[j].1)).unwrap();
    Ok(MassScan { entries, most_negative })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_examples() {
        assert!((laplace_green_ball([0.0; 3], [0.5, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let x = [0.3, -0.2, 0.1];
        assert!(laplace_green_ball(x, vec3::normalize([1.0, 2.0, -0.5])).unwrap().abs() < 1e-14);
        assert!(matches!(laplace_green_ball(x, x), Err(GreenError::Singularity(_))));
    }

    #[test]
    fn image_mass_and_gradient_closed_form() {
        let x = [0.3, 0.0, 0.0];
        let (m, g) = image_term(x, x, 1.0);
        assert!((m + 1.0 / (1.0 - 0.09)).abs() < 1e-14);
        assert!((g[0] + 0.3 / (0.91f64 * 0.91)).abs() < 1e-13);
    }

    #[test]
    fn radial_path_with_unit_potential_matches_sinh_oracle() {
        let d = Domain::unit_ball();
        let h = CoefficientH::Constant(1.0);
        let gf = solve_green(&h, [0.0; 3], &d, &GreenOptions::default()).unwrap();
        for &r in &[0.01, 0.1, 0.5, 0.9] {
            let exact = (1.0 - r as f64).sinh() / (r * 1f64.sinh());
            let v = gf.value([r, 0.0, 0.0]);
            assert!((v - exact).abs() < 1e-9, "r = {r}: {v} vs {exact}");
        }
        let e = extract_expansion(&gf, &h, &d, &FitOptions::default()).unwrap();
        assert!((e.mass + 1.0 / 1f64.tanh()).abs() < 1e-6);
    }

    #[test]
    fn unit_conversion_divides_by_omega2() {
        let gf = GreenField::images([0.0; 3], 1.0).unwrap();
        let e = extract_expansion(&gf, &CoefficientH::zero(), &Domain::unit_ball(), &FitOptions::default()).unwrap();
        let u = e.convert(Normalization::Unit);
        assert!((u.mass * OMEGA2 - e.mass).abs() < 1e-14);
        assert!((u.convert(Normalization::Scaled).mass - e.mass).abs() < 1e-14);
    }
}
