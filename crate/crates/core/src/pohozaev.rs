//! The structural condition `h + ½⟨x, ∇h⟩ ≥ 0`, the Pohožaev identities for
//! `Δu + hu = u⁵` and the Pohožaev inequality for sums of Green functions.
//!
//! With `u = 0` on `∂Ω` the general identity
//!
//! `½∫(hu² + h⟨x, ∇u²⟩) = B₁ + B₂`
//!
//! reduces to `B₁ = ½∫⟨x, ν⟩(∂_ν u)²`, and one more integration by parts gives
//! `∫(h + ½⟨x, ∇h⟩)u² = −½∫⟨x, ν⟩(∂_ν u)²`. The translation identity is
//! `∫_{∂Ω}(∂_ν u ∇u − ½|∇u|²ν + ⅙u⁶ν) = ½∫h∇u²`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bubble_analysis::BubbleConfiguration;
use crate::domain_geometry::{simpson, volume_integral, Domain, Grid3D, SphereRule, VolumeQuadrature};
use crate::elliptic_core::{CoefficientH, ScalarField3D, ScalarFieldRadial};
use crate::green::{extract_expansion, FitOptions, GreenError, GreenExpansion, GreenField, Normalization};
use crate::vec3::{self, Point};
use crate::OMEGA2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PohozaevError {
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error("boundary trace {trace:.3e} above tolerance {tolerance:.3e}")]
    BoundaryTrace { trace: f64, tolerance: f64 },
    #[error("expansions use mixed normalizations")]
    NormalizationMismatch,
    #[error("invalid input: {0}")]
    Input(String),
}

/// Which identity a report refers to; `P4(k)` is the `k`-th component of the vector one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdentityId {
    P1,
    P2,
    P3,
    P4(usize),
}

/// Sign bookkeeping behind the non-existence argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstructionVerdict {
    pub lhs_nonnegative: bool,
    pub rhs_nonpositive: bool,
    /// `LHS − RHS`; positive when both signs hold and `u ≢ 0`, so the identity cannot hold.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    pub identity: IdentityId,
    pub lhs: f64,
    pub rhs: f64,
    pub volume_term: f64,
    pub boundary_b1: f64,
    pub boundary_b2: f64,
    /// `|LHS − RHS| / (|LHS| + |RHS| + 10⁻¹²)`.
    pub identity_residual: f64,
    pub obstruction: Option<ObstructionVerdict>,
}

const RESIDUAL_FLOOR: f64 = 1e-12;

fn relative_residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + RESIDUAL_FLOOR)
}

impl PohozaevReport {
    fn new(identity: IdentityId, volume_term: f64, b1: f64, b2: f64) -> Self {
        let rhs = b1 + b2;
        Self {
            identity,
            lhs: volume_term,
            rhs,
            volume_term,
            boundary_b1: b1,
            boundary_b2: b2,
            identity_residual: relative_residual(volume_term, rhs),
            obstruction: None,
        }
    }

    /// CSV row `identity,lhs,rhs,residual`.
    pub fn csv_row(&self) -> String {
        let id = match self.identity {
            IdentityId::P1 => "P1".to_string(),
            IdentityId::P2 => "P2".to_string(),
            IdentityId::P3 => "P3".to_string(),
            IdentityId::P4(k) => format!("P4_{k}"),
        };
        format!("{id},{:e},{:e},{:e}", self.lhs, self.rhs, self.identity_residual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralCertificate {
    /// Minimum of `h + ½⟨x, ∇h⟩` over the sample.
    pub min_value: f64,
    pub argmin: Point,
    pub satisfied: bool,
    /// The gradient of `h` came from differences or spline slopes.
    pub approximate_gradient: bool,
}

/// Options for [`check_structural_condition`].
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralOptions {
    pub spacing: f64,
    pub tolerance: f64,
}

impl Default for StructuralOptions {
    fn default() -> Self {
        Self { spacing: 1.0 / 32.0, tolerance: 1e-12 }
    }
}

/// Minimum of `h + ½⟨x, ∇h⟩` over interior grid nodes and boundary points.
pub fn check_structural_condition(h: &CoefficientH, domain: &Domain, opts: &StructuralOptions) -> StructuralCertificate {
    let q = |p: Point| h.eval(p) + 0.5 * vec3::dot(p, h.grad(p));
    let mut best = (f64::INFINITY, [0.0; 3]);
    let mut visit = |p: Point| {
        let v = q(p);
        if v < best.0 {
            best = (v, p);
        }
    };
    visit([0.0; 3]);
    if let Ok(grid) = Grid3D::new(domain, opts.spacing) {
        for &i in &grid.interior {
            visit(grid.point(i));
        }
    }
    for &w in &SphereRule::new(32, 64).points {
        visit(domain.boundary_point(w));
    }
    StructuralCertificate {
        min_value: best.0,
        argmin: best.1,
        satisfied: best.0 >= -opts.tolerance,
        approximate_gradient: !h.has_analytic_gradient(),
    }
}

/// Input to the identity evaluators.
pub trait PohozaevField: Sync {
    fn value(&self, p: Point) -> f64;

    /// Exact gradient when known; otherwise the evaluators use differences.
    fn exact_grad(&self, _p: Point) -> Option<Point> {
        None
    }

    /// The radial profile when the field is radial about the origin.
    fn radial(&self) -> Option<&ScalarFieldRadial> {
        None
    }
}

impl PohozaevField for ScalarFieldRadial {
    fn value(&self, p: Point) -> f64 {
        ScalarFieldRadial::value(self, vec3::norm(p))
    }

    fn exact_grad(&self, p: Point) -> Option<Point> {
        if !self.exact_derivs {
            return None;
        }
        let r = vec3::norm(p);
        Some(if r > 0.0 { vec3::scale(p, self.deriv(r) / r) } else { [0.0; 3] })
    }

    fn radial(&self) -> Option<&ScalarFieldRadial> {
        Some(self)
    }
}

impl PohozaevField for ScalarField3D {
    fn value(&self, p: Point) -> f64 {
        self.value_and_grad(p).0
    }
}

/// A field given by closed-form value and gradient.
pub struct AnalyticField<F, G> {
    pub f: F,
    pub grad: G,
}

impl<F, G> PohozaevField for AnalyticField<F, G>
where
    F: Fn(Point) -> f64 + Sync,
    G: Fn(Point) -> Point + Sync,
{
    fn value(&self, p: Point) -> f64 {
        (self.f)(p)
    }

    fn exact_grad(&self, p: Point) -> Option<Point> {
        Some((self.grad)(p))
    }
}

/// Quadrature and difference settings for the evaluators.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityOptions {
    pub volume: VolumeQuadrature,
    pub surface: SphereRule,
    /// Step of the one-sided normal differences and tangential differences at `∂Ω`.
    pub boundary_step: f64,
    /// Step of the central differences in the volume.
    pub volume_step: f64,
    /// Largest admissible `|u|` on `∂Ω` for the identities assuming `u = 0` there.
    pub trace_tolerance: f64,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        Self {
            volume: VolumeQuadrature::default(),
            surface: SphereRule::default(),
            boundary_step: 1e-3,
            volume_step: 1e-5,
            trace_tolerance: 1e-6,
        }
    }
}

fn grad_fd(u: &dyn PohozaevField, p: Point, s: f64) -> Point {
    let mut g = [0.0; 3];
    for i in 0..3 {
        let mut a = p;
        a[i] += s;
        let mut b = p;
        b[i] -= s;
        g[i] = (u.value(a) - u.value(b)) / (2.0 * s);
    }
    g
}

fn volume_grad(u: &dyn PohozaevField, p: Point, s: f64) -> Point {
    u.exact_grad(p).unwrap_or_else(|| grad_fd(u, p, s))
}

/// `∇u` at a boundary point: exact when available, otherwise the one-sided
/// second-order normal difference plus central tangential differences.
fn boundary_grad(u: &dyn PohozaevField, b: Point, nu: Point, s: f64) -> Point {
    if let Some(g) = u.exact_grad(b) {
        return g;
    }
    let u0 = u.value(b);
    let dn = (3.0 * u0 - 4.0 * u.value(vec3::axpy(b, -s, nu)) + u.value(vec3::axpy(b, -2.0 * s, nu))) / (2.0 * s);
    let (t1, t2) = vec3::tangent_frame(nu);
    let mut g = vec3::scale(nu, dn);
    for t in [t1, t2] {
        let dt = (u.value(vec3::axpy(b, s, t)) - u.value(vec3::axpy(b, -s, t))) / (2.0 * s);
        g = vec3::axpy(g, dt, t);
    }
    g
}

/// `∫_{∂Ω} f(x, ν) dσ` with `dσ = ρ²/⟨w, ν⟩ dω` over directions `w`.
fn surface_integral<const K: usize>(domain: &Domain, rule: &SphereRule, f: impl Fn(Point, Point) -> [f64; K]) -> [f64; K] {
    let mut acc = [0.0; K];
    for (&w, &wt) in rule.points.iter().zip(&rule.weights) {
        let rho = domain.boundary_radius(w);
        let nu = domain.normal(w);
        let b = vec3::scale(w, rho);
        let ds = rho * rho / vec3::dot(w, nu);
        let v = f(b, nu);
        for k in 0..K {
            acc[k] += wt * ds * v[k];
        }
    }
    acc
}

fn radial_case<'a>(u: &'a dyn PohozaevField, h: &CoefficientH, domain: &Domain) -> Option<(&'a ScalarFieldRadial, f64)> {
    let prof = u.radial()?;
    let r = domain.ball_radius()?;
    (h.is_radial() && (prof.outer_radius() - r).abs() <= 1e-12 * r).then_some((prof, r))
}

/// `u′(R)`: exact sample, or the one-sided second-order difference on the last nodes.
fn radial_end_slope(p: &ScalarFieldRadial) -> f64 {
    let n = p.values.len();
    if p.exact_derivs {
        return p.derivs[n - 1];
    }
    let x = &p.grid.nodes;
    let (h1, h2) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    let (y0, y1, y2) = (p.values[n - 3], p.values[n - 2], p.values[n - 1]);
    y0 * h2 / (h1 * (h1 + h2)) - y1 * (h1 + h2) / (h1 * h2) + y2 * (2.0 * h2 + h1) / (h2 * (h1 + h2))
}

/// `4π∫₀^R g(r, u, u′) r² dr` by Simpson on the profile nodes.
fn radial_volume(p: &ScalarFieldRadial, g: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let mut x = vec![0.0];
    let mut y = vec![0.0];
    for ((&r, &v), &d) in p.grid.nodes.iter().zip(&p.values).zip(&p.derivs) {
        x.push(r);
        y.push(g(r, v, d) * r * r);
    }
    OMEGA2 * simpson(&x, &y)
}

fn boundary_trace(u: &dyn PohozaevField, domain: &Domain, rule: &SphereRule) -> f64 {
    rule.points.iter().map(|&w| u.value(domain.boundary_point(w)).abs()).fold(0.0, f64::max)
}

/// `½∫(hu² + h⟨x, ∇u²⟩) = B₁ + B₂` with
/// `B₁ = ∫_{∂Ω}(⟨x, ∇u⟩∂_ν u + ½u∂_ν u − ½⟨x, ν⟩|∇u|²)` and `B₂ = ∫_{∂Ω}⟨x, ν⟩u⁶/6`.
pub fn evaluate_identity_p1(u: &dyn PohozaevField, h: &CoefficientH, domain: &Domain, opts: &IdentityOptions) -> PohozaevReport {
    if let Some((p, r)) = radial_case(u, h, domain) {
        let vol = radial_volume(p, |s, v, d| 0.5 * h.eval_radial(s).unwrap() * (v * v + 2.0 * s * v * d));
        let ur = p.values[p.values.len() - 1];
        let d = radial_end_slope(p);
        let area = OMEGA2 * r * r;
        let b1 = area * (0.5 * r * d * d + 0.5 * ur * d);
        let b2 = area * r * ur.powi(6) / 6.0;
        return PohozaevReport::new(IdentityId::P1, vol, b1, b2);
    }
    let s = opts.volume_step;
    let integrand = |x: Point| {
        let v = u.value(x);
        let g = volume_grad(u, x, s);
        0.5 * h.eval(x) * (v * v + 2.0 * v * vec3::dot(x, g))
    };
    let vol = volume_integral(&integrand, domain, None, &opts.volume);
    let [b1, b2] = surface_integral(domain, &opts.surface, |b, nu| {
        let v = u.value(b);
        let g = boundary_grad(u, b, nu, opts.boundary_step);
        let dn = vec3::dot(g, nu);
        let xn = vec3::dot(b, nu);
        [vec3::dot(b, g) * dn + 0.5 * v * dn - 0.5 * xn * vec3::norm2(g), xn * v.powi(6) / 6.0]
    });
    PohozaevReport::new(IdentityId::P1, vol, b1, b2)
}

/// The `u = 0` reduction `½∫h(u² + ⟨x, ∇u²⟩) = ½∫_{∂Ω}⟨x, ν⟩(∂_ν u)²`.
pub fn evaluate_identity_p2(
    u: &dyn PohozaevField,
    h: &CoefficientH,
    domain: &Domain,
    opts: &IdentityOptions,
) -> Result<PohozaevReport, PohozaevError> {
    require_zero_trace(u, domain, opts)?;
    let p1 = evaluate_identity_p1(u, h, domain, opts);
    let b = if let Some((p, r)) = radial_case(u, h, domain) {
        let d = radial_end_slope(p);
        0.5 * OMEGA2 * r * r * r * d * d
    } else {
        surface_integral(domain, &opts.surface, |b, nu| {
            let dn = vec3::dot(boundary_grad(u, b, nu, opts.boundary_step), nu);
            [0.5 * vec3::dot(b, nu) * dn * dn]
        })[0]
    };
    Ok(PohozaevReport::new(IdentityId::P2, p1.volume_term, b, 0.0))
}

fn require_zero_trace(u: &dyn PohozaevField, domain: &Domain, opts: &IdentityOptions) -> Result<(), PohozaevError> {
    let trace = boundary_trace(u, domain, &opts.surface);
    if trace > opts.trace_tolerance {
        return Err(PohozaevError::BoundaryTrace { trace, tolerance: opts.trace_tolerance });
    }
    Ok(())
}

/// `∫(h + ½⟨x, ∇h⟩)u² = −½∫_{∂Ω}⟨x, ν⟩(∂_ν u)²`, with the obstruction verdict.
pub fn evaluate_identity_p3(
    u: &dyn PohozaevField,
    h: &CoefficientH,
    domain: &Domain,
    opts: &IdentityOptions,
) -> Result<PohozaevReport, PohozaevError> {
    require_zero_trace(u, domain, opts)?;
    let (vol, b1) = if let Some((p, r)) = radial_case(u, h, domain) {
        let vol = radial_volume(p, |s, v, _| (h.eval_radial(s).unwrap() + 0.5 * s * h.radial_derivative(s).unwrap()) * v * v);
        let d = radial_end_slope(p);
        (vol, -0.5 * OMEGA2 * r * r * r * d * d)
    } else {
        let integrand = |x: Point| {
            let v = u.value(x);
            (h.eval(x) + 0.5 * vec3::dot(x, h.grad(x))) * v * v
        };
        let vol = volume_integral(&integrand, domain, None, &opts.volume);
        let b = surface_integral(domain, &opts.surface, |b, nu| {
            let dn = vec3::dot(boundary_grad(u, b, nu, opts.boundary_step), nu);
            [-0.5 * vec3::dot(b, nu) * dn * dn]
        })[0];
        (vol, b)
    };
    let mut rep = PohozaevReport::new(IdentityId::P3, vol, b1, 0.0);
    rep.obstruction = Some(ObstructionVerdict {
        lhs_nonnegative: vol >= 0.0,
        rhs_nonpositive: b1 <= 0.0,
        margin: vol - b1,
    });
    Ok(rep)
}

/// Componentwise `∫_{∂Ω}(∂_ν u ∇u − ½|∇u|²ν + ⅙u⁶ν) = ½∫h∇u²`; the second value is
/// the largest component residual.
pub fn evaluate_identity_p4(
    u: &dyn PohozaevField,
    h: &CoefficientH,
    domain: &Domain,
    opts: &IdentityOptions,
) -> ([PohozaevReport; 3], f64) {
    let s = opts.volume_step;
    let mut rhs = [0.0; 3];
    for (k, slot) in rhs.iter_mut().enumerate() {
        let integrand = |x: Point| h.eval(x) * u.value(x) * volume_grad(u, x, s)[k];
        *slot = volume_integral(&integrand, domain, None, &opts.volume);
    }
    let lhs = surface_integral(domain, &opts.surface, |b, nu| {
        let v = u.value(b);
        let g = boundary_grad(u, b, nu, opts.boundary_step);
        let dn = vec3::dot(g, nu);
        let c = v.powi(6) / 6.0 - 0.5 * vec3::norm2(g);
        [dn * g[0] + c * nu[0], dn * g[1] + c * nu[1], dn * g[2] + c * nu[2]]
    });
    let reps = [0, 1, 2].map(|k| PohozaevReport {
        identity: IdentityId::P4(k),
        lhs: lhs[k],
        rhs: rhs[k],
        volume_term: rhs[k],
        boundary_b1: lhs[k],
        boundary_b2: 0.0,
        identity_residual: relative_residual(lhs[k], rhs[k]),
        obstruction: None,
    });
    let worst = reps.iter().map(|r| r.identity_residual).fold(0.0, f64::max);
    (reps, worst)
}

/// Expansion of `G = Σⱼ λⱼ𝒢(·, xⱼ)` at each `xᵢ` in the unit normalization:
/// `G = λᵢ/(ω₂|x − xᵢ|) + mᵢ + ½λᵢh(xᵢ)|x − xᵢ| + γᵢ(x)`.
pub fn combined_expansions(
    config: &BubbleConfiguration,
    fields: &[GreenField],
    domain: &Domain,
    fit: &FitOptions,
) -> Result<Vec<GreenExpansion>, PohozaevError> {
    if fields.len() != config.points.len() {
        return Err(PohozaevError::Input(format!("{} Green fields for {} points", fields.len(), config.points.len())));
    }
    let mut out = Vec::with_capacity(fields.len());
    for (i, (&xi, &li)) in config.points.iter().zip(&config.weights).enumerate() {
        let own = extract_expansion(&fields[i], &fields[i].h, domain, fit)?;
        let mut mass = li * own.mass;
        let mut grad = vec3::scale(own.grad_regular, li);
        for (j, fj) in fields.iter().enumerate() {
            if j != i {
                let (v, g) = fj.value_and_grad(xi);
                mass += config.weights[j] * v;
                grad = vec3::axpy(grad, config.weights[j], g);
            }
        }
        out.push(
            GreenExpansion { mass, grad_regular: grad, shell_residuals: Vec::new(), ..own }
                .convert(Normalization::Unit),
        );
    }
    Ok(out)
}

/// `Σᵢ λᵢ(mᵢ + 2⟨xᵢ, ∇γᵢ(xᵢ)⟩)` in the unit normalization; negative on star-shaped
/// domains when `h` satisfies the structural condition.
pub fn green_pohozaev_sum(config: &BubbleConfiguration, expansions: &[GreenExpansion]) -> Result<f64, PohozaevError> {
    if expansions.len() != config.points.len() {
        return Err(PohozaevError::Input(format!("{} expansions for {} points", expansions.len(), config.points.len())));
    }
    let Some(first) = expansions.first() else {
        return Err(PohozaevError::Input("empty configuration".into()));
    };
    if expansions.iter().any(|e| e.normalization != first.normalization) {
        return Err(PohozaevError::NormalizationMismatch);
    }
    Ok(expansions
        .iter()
        .zip(config.points.iter().zip(&config.weights))
        .map(|(e, (&x, &l))| {
            let e = e.convert(Normalization::Unit);
            l * (e.mass + 2.0 * vec3::dot(x, e.grad_regular))
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structural_examples() {
        let d = Domain::unit_ball();
        let o = StructuralOptions::default();
        let c = check_structural_condition(&CoefficientH::Constant(0.7), &d, &o);
        assert!(c.satisfied && (c.min_value - 0.7).abs() < 1e-15);
        let c = check_structural_condition(&CoefficientH::radius_squared(), &d, &o);
        assert!(c.satisfied && c.min_value.abs() < 1e-15);
        let c = check_structural_condition(&CoefficientH::RadialPolynomial(vec![1.0, 0.0, -2.0]), &d, &o);
        assert!(!c.satisfied && (c.min_value + 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_gives_zero_reports() {
        let d = Domain::unit_ball();
        let o = IdentityOptions::default();
        let z = AnalyticField { f: |_p: Point| 0.0, grad: |_p: Point| [0.0; 3] };
        let h = CoefficientH::Constant(1.0);
        let p1 = evaluate_identity_p1(&z, &h, &d, &o);
        assert_eq!((p1.lhs, p1.rhs, p1.identity_residual), (0.0, 0.0, 0.0));
        let p3 = evaluate_identity_p3(&z, &h, &d, &o).unwrap();
        assert_eq!(p3.identity_residual, 0.0);
        let (_, w) = evaluate_identity_p4(&z, &h, &d, &o);
        assert_eq!(w, 0.0);
    }

    #[test]
    fn trace_precondition() {
        let d = Domain::unit_ball();
        let one = AnalyticField { f: |_p: Point| 1.0, grad: |_p: Point| [0.0; 3] };
        let r = evaluate_identity_p3(&one, &CoefficientH::zero(), &d, &IdentityOptions::default());
        assert!(matches!(r, Err(PohozaevError::BoundaryTrace { .. })));
    }

    #[test]
    fn unit_potential_reports_contradiction() {
        let d = Domain::unit_ball();
        let u = AnalyticField {
            f: |p: Point| 1.0 - vec3::norm2(p),
            grad: |p: Point| vec3::scale(p, -2.0),
        };
        let r = evaluate_identity_p3(&u, &CoefficientH::Constant(1.0), &d, &IdentityOptions::default()).unwrap();
        let v = r.obstruction.unwrap();
        assert!(v.lhs_nonnegative && v.rhs_nonpositive && v.margin > 0.0);
        // ∫(1 − r²)² = 32π/105 and ½∫_{∂B}(∂_ν u)² = 8π
        assert!((r.lhs - 32.0 * std::f64::consts::PI / 105.0).abs() < 1e-8);
        assert!((r.rhs + 8.0 * std::f64::consts::PI).abs() < 1e-10);
    }
}
