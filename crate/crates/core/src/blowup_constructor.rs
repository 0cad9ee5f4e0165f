//! Explicit blowing-up families and the potentials that make them exact solutions.
//!
//! A positive `u` vanishing on `∂Ω` solves `Δu + h̃u = 3u⁵` for the residual potential
//! `h̃ = (3u⁵ − Δu)/u`, and `3^{1/4}u` then solves `Δv + h̃v = v⁵`. The families below
//! are built from Green functions so that `h̃ → h` as `ε → 0`:
//!
//! - the radial one-bubble family `u_ε = U_ε + η_ε V_ε` on the unit ball, with
//!   `U_ε = ε^{1/2}(ε² + G⁻²)^{-1/2}` and `V_ε = −γ₀(0)ε^{1/2}(1 + ε²G²)^{-3/2}`;
//! - the two-bubble family at a balanced pair `(x₁, x₂)` with weight `λ`.
//!
//! Every field is evaluated as a [`Jet`], so `Δu` follows from the chain rule and
//! `ΔG = −hG` away from the sources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain_geometry::{simpson, Domain, Field3, GeometryError, RadialGrid};
use crate::elliptic_core::{CoefficientH, ScalarFieldRadial};
use crate::green::{extract_expansion, solve_green, FitOptions, GreenError, GreenField, GreenOptions};
use crate::jet::Jet;
use crate::vec3::{self, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("family is not positive: u = {value:.3e} at {at:?}")]
    NotPositive { at: Point, value: f64 },
    #[error("no point with negative mass among {0} candidates")]
    NoNegativeMass(usize),
    #[error("F has no sign change along any of {0} rays")]
    ConfigurationNotFound(usize),
    #[error("invalid input: {0}")]
    Input(String),
}

/// `U(s) = s(1 + s²)^{-1/2}` composed with `s`.
pub fn profile_u(s: Jet) -> Jet {
    let v = s.v;
    let q = 1.0 + v * v;
    s.compose(v / q.sqrt(), q.powf(-1.5), -3.0 * v * q.powf(-2.5))
}

/// `(1 + s²)^{-3/2} = U′(s) = 1 − V(s)` composed with `s`.
pub fn profile_u_prime(s: Jet) -> Jet {
    let v = s.v;
    let q = 1.0 + v * v;
    s.compose(q.powf(-1.5), -3.0 * v * q.powf(-2.5), -3.0 * q.powf(-2.5) + 15.0 * v * v * q.powf(-3.5))
}

/// `V(s) = 1 − (1 + s²)^{-3/2}` composed with `s`.
pub fn profile_v(s: Jet) -> Jet {
    let v = s.v;
    let q = 1.0 + v * v;
    s.compose(-(-1.5 * (v * v).ln_1p()).exp_m1(), 3.0 * v * q.powf(-2.5), 3.0 * q.powf(-2.5) - 15.0 * v * v * q.powf(-3.5))
}

/// `ψ_ε(s) = 1 + ln(1 + s⁻²)/ln ε²` composed with `s`.
pub fn profile_psi(eps: f64, s: Jet) -> Jet {
    let l = (eps * eps).ln();
    let v = s.v;
    let v2 = v * v;
    let q = v2 + 1.0;
    s.compose(1.0 + (1.0 / v2).ln_1p() / l, -2.0 / (l * v * q), 2.0 * (3.0 * v2 + 1.0) / (l * v2 * q * q))
}

/// `W(s) = −13U/4 + 8(2U³ − U) ln U − 2(U⁻¹ − 8U + 8U³) s·arctan(1/s)` with `U = U(s)`.
///
/// `ln U = −½ ln(1 + s⁻²)` keeps the evaluation free of cancellation at both ends, where
/// `W(0⁺) = −π` and `W(∞) = −21/4`.
pub fn profile_w(s: Jet) -> Jet {
    let (f0, f1, f2) = profile_w_derivatives(s.v);
    s.compose(f0, f1, f2)
}

/// `(W, W′, W″)` at `s > 0`.
pub fn profile_w_derivatives(s: f64) -> (f64, f64, f64) {
    let t = Jet::new(s, [1.0, 0.0, 0.0], 0.0);
    let u = profile_u(t);
    let ln_u = t.powi(-2).ln_1p().scale(-0.5);
    let u3 = u.powi(3);
    let sat = t * t.recip().atan();
    let w = u.scale(-13.0 / 4.0) + (u3.scale(2.0) - u) * ln_u * 8.0 - (u.recip() - u.scale(8.0) + u3.scale(8.0)) * sat * 2.0;
    (w.v, w.g[0], -w.lap)
}

/// Smooth radial cutoff equal to 1 on `r ≤ inner` and 0 on `r ≥ outer`, built from
/// `e^{-1/t}` so it is `C^∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    pub fn new(inner: f64, outer: f64) -> Result<Self, ConstructionError> {
        if !(inner > 0.0 && outer > inner) {
            return Err(ConstructionError::Input(format!("cutoff radii {inner}, {outer} must satisfy 0 < inner < outer")));
        }
        Ok(Self { inner, outer })
    }

    /// `η(|x − c|)` as a jet at `x`.
    pub fn jet(&self, x: Point, c: Point) -> Jet {
        let r2 = vec3::norm2(vec3::sub(x, c));
        if r2 <= self.inner * self.inner {
            return Jet::constant(1.0);
        }
        if r2 >= self.outer * self.outer {
            return Jet::constant(0.0);
        }
        let t = (Jet::dist(x, c).scale(-1.0) + self.outer) / (self.outer - self.inner);
        let a = bump(t);
        let b = bump(-t + 1.0);
        a / (a + b)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.jet([r, 0.0, 0.0], [0.0; 3]).v
    }
}

/// `e^{-1/t}` for `t > 0`, zero otherwise.
fn bump(t: Jet) -> Jet {
    if t.v <= 0.0 {
        return Jet::constant(0.0);
    }
    let f = (-1.0 / t.v).exp();
    let t2 = t.v * t.v;
    t.compose(f, f / t2, f * (1.0 - 2.0 * t.v) / (t2 * t2))
}

/// Value and gradient of `γ_x` at its source: exact for closed forms, fitted otherwise.
fn source_expansion(gf: &GreenField, domain: &Domain, fit: &FitOptions) -> Result<(f64, Point), GreenError> {
    if gf.has_exact_regular() {
        return Ok(gf.regular(gf.source));
    }
    let e = extract_expansion(gf, &gf.h, domain, fit)?;
    Ok((e.mass, e.grad_regular))
}

/// Green function with source `x`: method of images when `h ≡ 0` on a ball.
fn green_at(h: &CoefficientH, x: Point, domain: &Domain, opts: &GreenOptions) -> Result<GreenField, GreenError> {
    match (h.is_zero(), domain.ball_radius()) {
        (true, Some(r)) => GreenField::images(x, r),
        _ => solve_green(h, x, domain, opts),
    }
}

/// Parameters of the radial family on the unit ball.
#[derive(Debug, Clone)]
pub struct RadialFamilyParams {
    pub eps: f64,
    pub h: CoefficientH,
    /// `G = 𝒢(0, ·)` in the scaled normalization.
    pub green: GreenField,
    /// `γ₀(0)`.
    pub mass: f64,
    pub cutoff: Cutoff,
}

impl RadialFamilyParams {
    /// Builds `G` for a radial `h` on the unit ball and reads off `γ₀(0)`.
    pub fn new(h: &CoefficientH, eps: f64, opts: &GreenOptions) -> Result<Self, ConstructionError> {
        if !h.is_radial() {
            return Err(ConstructionError::Input("the radial family needs a radial potential".into()));
        }
        let domain = Domain::unit_ball();
        let green = green_at(h, [0.0; 3], &domain, opts)?;
        let (mass, _) = source_expansion(&green, &domain, &FitOptions::default())?;
        Self::from_green(green, mass, eps)
    }

    pub fn from_green(green: GreenField, mass: f64, eps: f64) -> Result<Self, ConstructionError> {
        if !(eps > 0.0 && eps < 0.1) {
            return Err(ConstructionError::Input(format!("ε = {eps} must lie in (0, 0.1)")));
        }
        Ok(Self { eps, h: green.h.clone(), green, mass, cutoff: Cutoff { inner: 0.25, outer: 0.5 } })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self, ConstructionError> {
        Self::from_green(self.green.clone(), self.mass, eps)
    }

    /// `U_ε = ε^{-1/2}U(εG)` at `x ≠ 0`.
    pub fn u_eps(&self, x: Point) -> Jet {
        profile_u(self.green.jet(x).scale(self.eps)).scale(self.eps.powf(-0.5))
    }

    /// `V_ε = −γ₀(0)ε^{1/2}(1 + ε²G²)^{-3/2}` at `x ≠ 0`.
    pub fn v_eps(&self, x: Point) -> Jet {
        profile_u_prime(self.green.jet(x).scale(self.eps)).scale(-self.mass * self.eps.sqrt())
    }

    /// `η_ε = η(|x|) ln(ε² + |x|²)/ln ε²`.
    pub fn eta_eps(&self, x: Point) -> Jet {
        let e2 = self.eps * self.eps;
        let c = self.cutoff.jet(x, [0.0; 3]);
        if c.v == 0.0 {
            return c;
        }
        c * (Jet::dist2(x, [0.0; 3]) + e2).ln().scale(1.0 / e2.ln())
    }

    /// `u_ε = U_ε + η_ε V_ε` at `x ≠ 0`.
    pub fn jet(&self, x: Point) -> Jet {
        self.u_eps(x) + self.eta_eps(x) * self.v_eps(x)
    }
}

/// `u_ε` on the nodes of `grid` (radii in `(0, 1]`), with exact derivatives.
pub fn radial_family(params: &RadialFamilyParams, grid: &RadialGrid) -> Result<ScalarFieldRadial, ConstructionError> {
    let mut values = Vec::with_capacity(grid.len());
    let mut derivs = Vec::with_capacity(grid.len());
    for &r in &grid.nodes {
        let x = [r, 0.0, 0.0];
        let (v, d) = if r >= 1.0 { (0.0, params.jet([1.0 - 1e-12, 0.0, 0.0]).g[0]) } else {
            let j = params.jet(x);
            (j.v, j.g[0])
        };
        if r < 1.0 && !(v > 0.0) {
            return Err(ConstructionError::NotPositive { at: x, value: v });
        }
        values.push(v);
        derivs.push(d);
    }
    Ok(ScalarFieldRadial::from_samples(grid.clone(), values, derivs))
}

/// A field whose jets are available in closed form.
pub trait JetField: Sync {
    fn jet(&self, x: Point) -> Jet;
}

impl JetField for RadialFamilyParams {
    fn jet(&self, x: Point) -> Jet {
        RadialFamilyParams::jet(self, x)
    }
}

/// `h̃ = (3u⁵ − Δu)/u` and `h̃ − h` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub u: f64,
    pub h_tilde: f64,
    pub deviation: f64,
}

/// Residual potential of a jet field at `x`.
pub fn residual_at(u: &dyn JetField, h_target: &CoefficientH, x: Point) -> ResidualSample {
    let j = u.jet(x);
    let h_tilde = (3.0 * j.v.powi(5) - j.lap) / j.v;
    ResidualSample { u: j.v, h_tilde, deviation: h_tilde - h_target.eval(x) }
}

/// `3^{1/4}u`, which solves `Δv + h̃v = v⁵` when `Δu + h̃u = 3u⁵`.
pub fn normalized_solution_value(u: f64) -> f64 {
    3f64.powf(0.25) * u
}

/// Norms of `h̃ − h` for a radial field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub l3_norm: f64,
    pub linf_norm: f64,
    pub min_u: f64,
    pub positive: bool,
}

/// `‖h̃ − h‖` over the ball for a radial jet field, by Simpson on `nodes` (increasing,
/// in `(0, 1)`); the sup is taken over the same nodes.
pub fn residual_potential_radial(u: &dyn JetField, h_target: &CoefficientH, nodes: &[f64]) -> Result<ResidualNorms, ConstructionError> {
    let samples: Vec<ResidualSample> = nodes.par_iter().map(|&r| residual_at(u, h_target, [r, 0.0, 0.0])).collect();
    let min_u = samples.iter().map(|s| s.u).fold(f64::INFINITY, f64::min);
    if !(min_u > 0.0) {
        let k = samples.iter().position(|s| !(s.u > 0.0)).unwrap();
        return Err(ConstructionError::NotPositive { at: [nodes[k], 0.0, 0.0], value: samples[k].u });
    }
    let y: Vec<f64> = samples.iter().zip(nodes).map(|(s, &r)| s.deviation.abs().powi(3) * r * r).collect();
    let l3 = (crate::OMEGA2 * simpson(nodes, &y)).cbrt();
    let linf = samples.iter().map(|s| s.deviation.abs()).fold(0.0, f64::max);
    Ok(ResidualNorms { l3_norm: l3, linf_norm: linf, min_u, positive: true })
}

/// `h̃ − h` for a sampled radial field through the discrete radial Laplacian.
pub fn residual_potential_fd(u: &ScalarFieldRadial, h_target: &CoefficientH) -> Result<ResidualNorms, ConstructionError> {
    let lap = crate::elliptic_core::apply_laplacian_radial(u).map_err(|e| ConstructionError::Input(e.to_string()))?;
    let nodes = &u.grid.nodes;
    let n = nodes.len();
    let mut dev = vec![0.0; n];
    let mut min_u = f64::INFINITY;
    for i in 0..n - 1 {
        let v = u.values[i];
        min_u = min_u.min(v);
        dev[i] = (3.0 * v.powi(5) - lap.values[i]) / v - h_target.eval_radial(nodes[i]).unwrap_or(f64::NAN);
    }
    let inner = &nodes[..n - 1];
    let y: Vec<f64> = dev[..n - 1].iter().zip(inner).map(|(d, &r)| d.abs().powi(3) * r * r).collect();
    Ok(ResidualNorms {
        l3_norm: (crate::OMEGA2 * simpson(inner, &y)).cbrt(),
        linf_norm: dev[..n - 1].iter().map(|d| d.abs()).fold(0.0, f64::max),
        min_u,
        positive: min_u > 0.0,
    })
}

/// Default quadrature nodes for radial residual norms: geometric below `10⁻²`, down to
/// `10⁻³ε`, then uniform up to `1 − 10⁻⁹`.
pub fn radial_residual_nodes(eps: f64) -> Vec<f64> {
    let lo = 1e-3 * eps;
    let switch = 1e-2;
    let per_decade = 400.0;
    let m = ((switch / lo).log10() * per_decade).ceil() as usize;
    let mut nodes: Vec<f64> = (0..m).map(|i| lo * (switch / lo).powf(i as f64 / m as f64)).collect();
    let n = 20_000;
    let top = 1.0 - 1e-9;
    nodes.extend((0..=n).map(|i| switch + (top - switch) * i as f64 / n as f64));
    nodes
}

/// The balanced two-bubble configuration and its Green data.
#[derive(Debug, Clone)]
pub struct TwoBubbleParams {
    pub x1: Point,
    pub x2: Point,
    pub lambda: f64,
    pub eps: f64,
    pub delta: f64,
    pub h: CoefficientH,
    pub g1: GreenField,
    pub g2: GreenField,
    /// `γ₁(x₁)` and `γ₂(x₂)`.
    pub gamma1: f64,
    pub gamma2: f64,
    pub grad_gamma1: Point,
    pub grad_gamma2: Point,
    /// `∇G₂(x₁)` and `∇G₁(x₂)`.
    pub grad_g2_at_x1: Point,
    pub grad_g1_at_x2: Point,
    pub h1: f64,
    pub h2: f64,
    /// `|√λG₂(x₁) + γ₁(x₁)|` and `|G₁(x₂) + √λγ₂(x₂)|`.
    pub balance_residuals: [f64; 2],
}

/// Serializable summary of [`TwoBubbleParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBubbleSummary {
    pub x1: Point,
    pub x2: Point,
    pub lambda: f64,
    pub delta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub balance_residuals: [f64; 2],
}

impl TwoBubbleParams {
    pub fn with_eps(&self, eps: f64) -> Result<Self, ConstructionError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(ConstructionError::Input(format!("ε = {eps} must lie in (0, 1)")));
        }
        Ok(Self { eps, ..self.clone() })
    }

    pub fn summary(&self) -> TwoBubbleSummary {
        TwoBubbleSummary {
            x1: self.x1,
            x2: self.x2,
            lambda: self.lambda,
            delta: self.delta,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            balance_residuals: self.balance_residuals,
        }
    }
}

/// Options for [`balance_configuration`].
#[derive(Debug, Clone)]
pub struct BalanceOptions {
    /// Candidates for `x₁`; the most negative mass among them is used.
    pub candidates: Vec<Point>,
    /// Ray directions from `x₁` searched in order for a sign change of `F`.
    pub directions: Vec<Point>,
    /// Samples per ray before bisection.
    pub ray_samples: usize,
    /// Bisection stops when the bracket is this small relative to the ray length.
    pub tolerance: f64,
    /// Rays stop this far from `∂Ω`, relative to the distance from `x₁` to `∂Ω`.
    pub boundary_margin: f64,
    pub eps: f64,
    pub green: GreenOptions,
    pub fit: FitOptions,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        Self {
            candidates: vec![[0.0; 3]],
            directions: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, 0.0, 0.0]],
            ray_samples: 64,
            tolerance: 1e-15,
            boundary_margin: 1e-3,
            eps: 1e-2,
            green: GreenOptions::default(),
            fit: FitOptions::default(),
        }
    }
}

/// Finds `x₂` with `F(x₂) = 𝒢(x₁, x₂)² − γ₁(x₁)γ_{x₂}(x₂) = 0` and
/// `λ = (γ₁(x₁)/𝒢(x₁, x₂))²`, so that `√λG₂(x₁) + γ₁(x₁) = G₁(x₂) + √λγ₂(x₂) = 0`.
pub fn balance_configuration(h: &CoefficientH, domain: &Domain, opts: &BalanceOptions) -> Result<TwoBubbleParams, ConstructionError> {
    if opts.candidates.is_empty() || opts.directions.is_empty() {
        return Err(ConstructionError::Input("need at least one candidate and one direction".into()));
    }
    let mut best: Option<(GreenField, f64, Point)> = None;
    for &c in &opts.candidates {
        let gf = green_at(h, c, domain, &opts.green)?;
        let (m, g) = source_expansion(&gf, domain, &opts.fit)?;
        if m < 0.0 && best.as_ref().map_or(true, |b| m < b.1) {
            best = Some((gf, m, g));
        }
    }
    let (g1, gamma1, grad_gamma1) = best.ok_or(ConstructionError::NoNegativeMass(opts.candidates.len()))?;
    let x1 = g1.source;
    let mass_at = |x: Point| -> Result<f64, ConstructionError> {
        if h.is_zero() {
            if let Some(r) = domain.ball_radius() {
                return Ok(-r / (r * r - vec3::norm2(x)));
            }
        }
        let gf = green_at(h, x, domain, &opts.green)?;
        Ok(source_expansion(&gf, domain, &opts.fit)?.0)
    };
    let f = |x: Point| -> Result<f64, ConstructionError> {
        let g = g1.value(x);
        Ok(g * g - gamma1 * mass_at(x)?)
    };
    for &dir in &opts.directions {
        let w = vec3::normalize(dir);
        let reach = ray_reach(domain, x1, w);
        let t_max = reach - opts.boundary_margin * domain.dist_to_boundary(x1);
        let n = opts.ray_samples.max(2);
        let mut prev: Option<(f64, f64)> = None;
        let mut bracket = None;
        for k in 1..=n {
            let t = t_max * k as f64 / n as f64;
            let v = f(vec3::axpy(x1, t, w))?;
            if let Some((tp, vp)) = prev {
                if vp > 0.0 && v <= 0.0 {
                    bracket = Some((tp, t));
                    break;
                }
            }
            prev = Some((t, v));
        }
        let Some((mut lo, mut hi)) = bracket else { continue };
        while hi - lo > opts.tolerance * t_max {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(vec3::axpy(x1, mid, w))? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (flo, fhi) = (f(vec3::axpy(x1, lo, w))?.abs(), f(vec3::axpy(x1, hi, w))?.abs());
        let t = if flo <= fhi { lo } else { hi };
        let x2 = vec3::axpy(x1, t, w);
        let g2 = green_at(h, x2, domain, &opts.green)?;
        let (gamma2, grad_gamma2) = source_expansion(&g2, domain, &opts.fit)?;
        let (g1_at_x2, grad_g1_at_x2) = g1.value_and_grad(x2);
        let (g2_at_x1, grad_g2_at_x1) = g2.value_and_grad(x1);
        let lambda = (gamma1 / g1_at_x2).powi(2);
        let sl = lambda.sqrt();
        let delta = 0.1 * domain.dist_to_boundary(x1).min(domain.dist_to_boundary(x2)).min(t);
        return Ok(TwoBubbleParams {
            x1,
            x2,
            lambda,
            eps: opts.eps,
            delta,
            h: h.clone(),
            balance_residuals: [(sl * g2_at_x1 + gamma1).abs(), (g1_at_x2 + sl * gamma2).abs()],
            g1,
            g2,
            gamma1,
            gamma2,
            grad_gamma1,
            grad_gamma2,
            grad_g2_at_x1,
            grad_g1_at_x2,
            h1: h.eval(x1),
            h2: h.eval(x2),
        });
    }
    Err(ConstructionError::ConfigurationNotFound(opts.directions.len()))
}

/// Distance from `x` to `∂Ω` along the unit direction `w`, by bisection on membership.
fn ray_reach(domain: &Domain, x: Point, w: Point) -> f64 {
    let mut lo = 0.0;
    let mut hi = 2.0 * domain.max_radius() + vec3::norm(x);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if domain.contains(vec3::axpy(x, mid, w)) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    lo
}

/// The eight-term two-bubble family, evaluable pointwise.
#[derive(Debug, Clone)]
pub struct TwoBubbleField {
    pub params: TwoBubbleParams,
    cut: Cutoff,
}

/// Wraps balanced parameters as an evaluable field.
pub fn two_bubble_family(params: &TwoBubbleParams) -> Result<TwoBubbleField, ConstructionError> {
    let cut = Cutoff::new(params.delta, 2.0 * params.delta)?;
    if !(params.lambda > 0.0) {
        return Err(ConstructionError::Input("λ must be positive".into()));
    }
    Ok(TwoBubbleField { params: params.clone(), cut })
}

/// One bubble's share of the family: centre, Green jet, weights and corrector data.
struct Side {
    center: Point,
    scale: f64,
    gamma: f64,
    grad_gamma: Point,
    /// `λ^{1/2}∇G₂(x₁)` or `λ^{-1/2}∇G₁(x₂)`.
    cross: Point,
    h_c: f64,
}

impl TwoBubbleField {
    fn sides(&self) -> [Side; 2] {
        let p = &self.params;
        let sl = p.lambda.sqrt();
        [
            Side { center: p.x1, scale: p.eps, gamma: p.gamma1, grad_gamma: p.grad_gamma1, cross: vec3::scale(p.grad_g2_at_x1, sl), h_c: p.h1 },
            Side { center: p.x2, scale: p.lambda * p.eps, gamma: p.gamma2, grad_gamma: p.grad_gamma2, cross: vec3::scale(p.grad_g1_at_x2, 1.0 / sl), h_c: p.h2 },
        ]
    }

    /// The bubble term `e^{-1/2}U(eG)` of one side.
    fn bubble(side: &Side, g: Jet) -> Jet {
        profile_u(g.scale(side.scale)).scale(side.scale.powf(-0.5))
    }

    /// The six corrector terms of one side, without the cutoff.
    fn corrector(&self, side: &Side, x: Point, g: Jet) -> Jet {
        let e = side.scale;
        let s = g.scale(e);
        let psi = profile_psi(self.params.eps, s);
        let v = profile_v(s).scale(side.gamma * e.sqrt());
        let up = profile_u_prime(s);
        let lin = up * Jet::linear(x, side.center, side.grad_gamma) + Jet::linear(x, side.center, side.cross);
        let z = psi * lin.scale(-e.sqrt());
        let w = profile_w(s).scale(side.h_c) - profile_u(s).powi(5).scale(1.5 * side.gamma * side.gamma);
        let y = psi * w.scale(e.powf(1.5));
        v + z + y
    }

    /// Jet of `u_ε` at `x ∉ {x₁, x₂}`.
    pub fn jet(&self, x: Point) -> Jet {
        let p = &self.params;
        let g = [p.g1.jet(x), p.g2.jet(x)];
        let mut u = Jet::constant(0.0);
        for (side, &gj) in self.sides().iter().zip(&g) {
            u = u + Self::bubble(side, gj);
            let c = self.cut.jet(x, side.center);
            if c.v != 0.0 {
                u = u + c * self.corrector(side, x, gj);
            }
        }
        u
    }

    /// `u_ε(x)`, including the limits at the two centres.
    pub fn value(&self, x: Point) -> f64 {
        let sides = self.sides();
        let fields = [&self.params.g1, &self.params.g2];
        for (k, side) in sides.iter().enumerate() {
            if x == side.center {
                let e = side.scale;
                // G = ∞ at its own centre: U → 1, V → 1, ψ → 1, W → −21/4, linear terms vanish
                let own = e.powf(-0.5) + side.gamma * e.sqrt() + e.powf(1.5) * (-21.0 / 4.0 * side.h_c - 1.5 * side.gamma * side.gamma);
                let other = &sides[1 - k];
                let gj = fields[1 - k].jet(x);
                let mut v = own + Self::bubble(other, gj).v;
                let c = self.cut.jet(x, other.center);
                if c.v != 0.0 {
                    v += c.v * self.corrector(other, x, gj).v;
                }
                return v;
            }
        }
        self.jet(x).v
    }
}

impl Field3 for TwoBubbleField {
    fn value(&self, p: Point) -> f64 {
        TwoBubbleField::value(self, p)
    }
}

impl JetField for TwoBubbleField {
    fn jet(&self, x: Point) -> Jet {
        TwoBubbleField::jet(self, x)
    }
}

/// Sup over a sample of the residuals of the exact piece identities, and the
/// remainder ratios `sup|remainder|/U_ε` of the asymptotic ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceReport {
    pub eps: f64,
    /// `(name, sup |LHS − RHS| / sup |LHS|)` for the exact identities.
    pub exact: Vec<(String, f64)>,
    /// `(name, sup |remainder|/U_ε)` for the expansions valid up to `o(U_ε)`.
    pub remainders: Vec<(String, f64)>,
}

impl PieceReport {
    pub fn exact_residual(&self, name: &str) -> Option<f64> {
        self.exact.iter().find(|(n, _)| n == name).map(|p| p.1)
    }

    pub fn remainder(&self, name: &str) -> Option<f64> {
        self.remainders.iter().find(|(n, _)| n == name).map(|p| p.1)
    }
}

/// Sample points in `B(x₁, 2δ)`: log-spaced radii from `10⁻²ε` along fixed directions.
fn piece_sample(params: &TwoBubbleParams, eps: f64) -> Vec<Point> {
    let dirs = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, -1.0],
        vec3::normalize([1.0, 1.0, 1.0]),
        vec3::normalize([-1.0, 2.0, 0.5]),
    ];
    let lo = 1e-2 * eps;
    let hi = 2.0 * params.delta;
    let n = 400;
    let mut pts = Vec::with_capacity(dirs.len() * n);
    for d in dirs {
        for i in 0..n {
            let r = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
            pts.push(vec3::axpy(params.x1, r, d));
        }
    }
    pts
}

/// Checks the identities satisfied by the building blocks around `x₁` at scale `eps`.
///
/// With `G = G₁`, `γ = γ₁`, `z = x − x₁` and the blocks `U_ε`, `V_ε = ε^{1/2}V(εG)`,
/// `W_ε = ε^{3/2}W(εG)`, `Y_ε = −(3/2)ε^{3/2}U(εG)⁵`, `Z_ε`, `Ũ_ε`:
///
/// - `U`: `ΔU_ε + hU_ε = 3U_ε⁵|∇G⁻¹|² + hεU_ε³` (exact);
/// - `V_radial`: the radial corrector `−γε^{1/2}(1 + ε²G²)^{-3/2}` (exact);
/// - `U_tilde`: the second bubble (exact);
/// - `U_expansion`, `V`, `W`, `Y`, `Z`: remainders of the expansions up to `o(U_ε)`.
pub fn verify_piece_identities(params: &TwoBubbleParams, eps: f64) -> Result<PieceReport, ConstructionError> {
    let p = params.with_eps(eps)?;
    let pts = piece_sample(&p, eps);
    let gamma = p.gamma1;
    let h0 = p.h1;
    let sl = p.lambda.sqrt();
    let se = eps.sqrt();
    let mut exact = [(0.0f64, 0.0f64); 3];
    let mut rem = [0.0f64; 5];
    for &x in &pts {
        let hx = p.h.eval(x);
        let g = p.g1.jet(x);
        let gv = g.v;
        let ginv = 1.0 / gv;
        let grad_ginv2 = g.grad_norm2() * ginv.powi(4);
        let s = g.scale(eps);
        let u = profile_u(s).scale(eps.powf(-0.5));
        let uv = u.v;
        let lhs = |j: Jet| j.lap + hx * j.v;
        // exact identities
        let rhs_u = 3.0 * uv.powi(5) * grad_ginv2 + hx * eps * uv.powi(3);
        let l = lhs(u);
        exact[0] = (exact[0].0.max((l - rhs_u).abs()), exact[0].1.max(l.abs()));
        let vr = profile_u_prime(s).scale(-gamma * se);
        let q = 1.0 + eps * eps * gv * gv;
        let e52 = eps.powf(2.5);
        let rhs_vr = 15.0 * uv.powi(4) * vr.v + 12.0 * gamma * e52 * gv.powi(4) * q.powf(-2.5)
            - se * gamma * hx * q.powf(-2.5) * (1.0 + 4.0 * eps * eps * gv * gv)
            - 3.0 * gamma * e52 * gv.powi(4) * q.powf(-3.5) * (1.0 - 4.0 * eps * eps * gv * gv) * (grad_ginv2 - 1.0);
        let l = lhs(vr);
        exact[1] = (exact[1].0.max((l - rhs_vr).abs()), exact[1].1.max(l.abs()));
        let g2 = p.g2.jet(x);
        let ut = profile_u(g2.scale(p.lambda * eps)).scale((p.lambda * eps).powf(-0.5));
        let rhs_ut = 3.0 * ut.v.powi(5) * g2.grad_norm2() / g2.v.powi(4) + p.lambda * eps * hx * ut.v.powi(3);
        let l = lhs(ut);
        exact[2] = (exact[2].0.max((l - rhs_ut).abs()), exact[2].1.max(l.abs()));
        // asymptotic lines
        let z = vec3::sub(x, p.x1);
        let zg = vec3::dot(z, p.grad_gamma1);
        let u5 = uv.powi(5);
        let u4 = uv.powi(4);
        let exp_u = 3.0 * u5 - 12.0 * gamma * ginv * u5 - 18.0 * ginv * zg * u5 + 18.0 * gamma * gamma * ginv * ginv * u5
            + h0 * (eps * eps - 8.0 * ginv * ginv) * u5;
        rem[0] = rem[0].max((lhs(u) - exp_u).abs() / uv);
        let v = profile_v(s).scale(se);
        let exp_v = 15.0 * u4 * v.v - 15.0 * se * u4 + 12.0 * ginv * u5
            + 12.0 * gamma * (5.0 / eps * ginv.powi(4) * uv.powi(7) - 4.0 * ginv * ginv * u5);
        rem[1] = rem[1].max((lhs(v) - exp_v).abs() / uv);
        let w = profile_w(s).scale(eps.powf(1.5));
        let exp_w = 15.0 * u4 * w.v + 8.0 * eps * uv.powi(3) - 9.0 * eps * eps * u5;
        rem[2] = rem[2].max((lhs(w) - exp_w).abs() / uv);
        let y = profile_u(s).powi(5).scale(-1.5 * eps.powf(1.5));
        let exp_y = 15.0 * u4 * y.v + 30.0 * eps.powi(3) * uv.powi(7) - 30.0 * eps.powi(4) * uv.powi(9);
        rem[3] = rem[3].max((lhs(y) - exp_y).abs() / uv);
        let zj = (profile_u_prime(s) * Jet::linear(x, p.x1, p.grad_gamma1) + Jet::linear(x, p.x1, p.grad_g2_at_x1).scale(sl)).scale(-se);
        let exp_z = 15.0 * u4 * zj.v + 18.0 * u5 * ginv * zg + 15.0 * (p.lambda * eps).sqrt() * u4 * vec3::dot(z, p.grad_g2_at_x1);
        // the Z line carries an O(εU_ε⁻¹) term besides o(U_ε)
        rem[4] = rem[4].max((lhs(zj) - exp_z).abs() / (uv + eps / uv));
    }
    let names = ["U", "V_radial", "U_tilde"];
    let exact = names.iter().zip(exact).map(|(n, (d, m))| (n.to_string(), d / m.max(f64::MIN_POSITIVE))).collect();
    let rnames = ["U_expansion", "V", "W", "Y", "Z"];
    let remainders = rnames.iter().zip(rem).map(|(n, r)| (n.to_string(), r)).collect();
    Ok(PieceReport { eps, exact, remainders })
}

/// Which family a sweep builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    Radial,
    TwoBubble,
}

/// Options for [`instability_sweep`].
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub seed: u64,
    /// Sample size for the two-bubble norms.
    pub samples: usize,
    pub green: GreenOptions,
    pub balance: BalanceOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { seed: 0, samples: 100_000, green: GreenOptions::default(), balance: BalanceOptions::default() }
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub l3_norm: f64,
    /// Sup on the grid (radial) or over the sample (two bubbles).
    pub linf_norm: f64,
    pub min_u: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSweep {
    pub mode: SweepMode,
    pub rows: Vec<SweepRow>,
    pub balance: Option<TwoBubbleSummary>,
}

impl ResidualSweep {
    pub fn eps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.eps).collect()
    }

    pub fn positivity_ok(&self) -> bool {
        self.rows.iter().all(|r| r.positive)
    }

    pub fn l3_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].l3_norm < w[0].l3_norm)
    }

    pub fn linf_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].linf_norm < w[0].linf_norm)
    }

    /// CSV with header `eps,l3_norm,linf_norm,min_u,balance_residual_1,balance_residual_2`.
    pub fn to_csv(&self) -> String {
        let [b1, b2] = self.balance.as_ref().map_or([f64::NAN; 2], |b| b.balance_residuals);
        let mut s = String::from("eps,l3_norm,linf_norm,min_u,balance_residual_1,balance_residual_2\n");
        for r in &self.rows {
            s.push_str(&format!("{:e},{:e},{:e},{:e},{:e},{:e}\n", r.eps, r.l3_norm, r.linf_norm, r.min_u, b1, b2));
        }
        s
    }
}

/// Builds the family at each `ε` and measures `h̃ − h`.
///
/// The radial mode works on the unit ball; the two-bubble mode balances a pair in
/// `domain` once and reuses it for every `ε`.
pub fn instability_sweep(
    mode: SweepMode,
    h: &CoefficientH,
    domain: &Domain,
    eps_list: &[f64],
    opts: &SweepOptions,
) -> Result<ResidualSweep, ConstructionError> {
    if eps_list.is_empty() {
        return Err(ConstructionError::Input("empty ε list".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ConstructionError::Input("ε values must decrease strictly".into()));
    }
    match mode {
        SweepMode::Radial => {
            if !domain.is_unit_ball() {
                return Err(ConstructionError::Input("the radial family lives on the unit ball".into()));
            }
            let base = RadialFamilyParams::new(h, eps_list[0], &opts.green)?;
            let rows = eps_list
                .iter()
                .map(|&eps| {
                    let p = base.with_eps(eps)?;
                    let n = residual_potential_radial(&p, h, &radial_residual_nodes(eps))?;
                    Ok(SweepRow { eps, l3_norm: n.l3_norm, linf_norm: n.linf_norm, min_u: n.min_u, positive: n.positive })
                })
                .collect::<Result<_, ConstructionError>>()?;
            Ok(ResidualSweep { mode, rows, balance: None })
        }
        SweepMode::TwoBubble => {
            let base = balance_configuration(h, domain, &opts.balance)?;
            let mut rows = Vec::with_capacity(eps_list.len());
            for &eps in eps_list {
                let fam = two_bubble_family(&base.with_eps(eps)?)?;
                let sample = StratifiedSample::new(domain, &fam.params, eps, opts.samples, opts.seed)?;
                let n = sample.norms(&fam, h);
                rows.push(SweepRow { eps, l3_norm: n.l3_norm, linf_norm: n.linf_norm, min_u: n.min_u, positive: n.positive });
            }
            Ok(ResidualSweep { mode, rows, balance: Some(base.summary()) })
        }
    }
}

/// Points drawn from a fixed mixture: uniform in `Ω`, log-uniform shells around each
/// centre, and a layer along `∂Ω`. Each point carries its mixture density, so
/// `Σ f/(N q)` estimates `∫_Ω f`.
#[derive(Debug, Clone)]
pub struct StratifiedSample {
    pub points: Vec<Point>,
    pub density: Vec<f64>,
}

const MIX_UNIFORM: f64 = 0.4;
const MIX_SHELL: f64 = 0.25;
const MIX_LAYER: f64 = 0.1;
const LAYER: f64 = 0.05;

impl StratifiedSample {
    pub fn new(domain: &Domain, params: &TwoBubbleParams, eps: f64, n: usize, seed: u64) -> Result<Self, ConstructionError> {
        if n < 10 {
            return Err(ConstructionError::Input("need at least 10 samples".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let volume = domain_volume(domain);
        let rmax = domain.max_radius();
        let centers = [params.x1, params.x2];
        let scales = [eps, params.lambda * eps];
        let shells: Vec<(f64, f64)> = centers
            .iter()
            .zip(scales)
            .map(|(&c, s)| (1e-3 * s.min(1.0) * params.delta, (4.0 * params.delta).min(0.9 * domain.dist_to_boundary(c))))
            .collect();
        let counts = [
            (n as f64 * MIX_UNIFORM) as usize,
            (n as f64 * MIX_SHELL) as usize,
            (n as f64 * MIX_SHELL) as usize,
        ];
        let layer_count = n - counts.iter().sum::<usize>();
        let mut points = Vec::with_capacity(n);
        for _ in 0..counts[0] {
            loop {
                let p = [rng.gen_range(-rmax..rmax), rng.gen_range(-rmax..rmax), rng.gen_range(-rmax..rmax)];
                if domain.contains(p) {
                    points.push(p);
                    break;
                }
            }
        }
        for k in 0..2 {
            let (lo, hi) = shells[k];
            for _ in 0..counts[k + 1] {
                let r = lo * (hi / lo).powf(rng.gen::<f64>());
                points.push(vec3::axpy(centers[k], r, random_direction(&mut rng)));
            }
        }
        let shell_lo3 = (1.0 - LAYER).powi(3);
        for _ in 0..layer_count {
            let w = random_direction(&mut rng);
            let s = (shell_lo3 + (1.0 - shell_lo3) * rng.gen::<f64>()).cbrt();
            let p = vec3::scale(w, s * domain.boundary_radius(w) * (1.0 - 1e-12));
            points.push(p);
        }
        let density = points
            .iter()
            .map(|&p| {
                let mut q = MIX_UNIFORM / volume;
                for k in 0..2 {
                    let (lo, hi) = shells[k];
                    let r = vec3::dist(p, centers[k]);
                    if r >= lo && r <= hi {
                        q += MIX_SHELL / (crate::OMEGA2 * r * r * r * (hi / lo).ln());
                    }
                }
                let nrm = vec3::norm(p);
                if nrm > 0.0 {
                    let w = vec3::scale(p, 1.0 / nrm);
                    let rho = domain.boundary_radius(w);
                    if nrm >= (1.0 - LAYER) * rho {
                        q += MIX_LAYER * 3.0 / (crate::OMEGA2 * rho.powi(3) * (1.0 - shell_lo3));
                    }
                }
                q
            })
            .collect();
        Ok(Self { points, density })
    }

    /// L³ estimate and sampled sup of `h̃ − h`, with the smallest sampled `u`.
    pub fn norms(&self, u: &dyn JetField, h: &CoefficientH) -> ResidualNorms {
        let samples: Vec<ResidualSample> = self.points.par_iter().map(|&x| residual_at(u, h, x)).collect();
        let n = self.points.len() as f64;
        let l3 = samples.iter().zip(&self.density).map(|(s, q)| s.deviation.abs().powi(3) / (n * q)).sum::<f64>().cbrt();
        let linf = samples.iter().map(|s| s.deviation.abs()).fold(0.0, f64::max);
        let min_u = samples.iter().map(|s| s.u).fold(f64::INFINITY, f64::min);
        ResidualNorms { l3_norm: l3, linf_norm: linf, min_u, positive: min_u > 0.0 }
    }
}

fn random_direction(rng: &mut ChaCha8Rng) -> Point {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

fn domain_volume(domain: &Domain) -> f64 {
    crate::domain_geometry::SphereRule::new(32, 64).integrate(|w| domain.boundary_radius(w).powi(3) / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded(s: f64) -> Jet {
        Jet::new(s, [1.0, 0.0, 0.0], 0.0)
    }

    #[test]
    fn profile_identities() {
        for &s in &[1e-3, 0.1, 1.0, 7.0, 1e3] {
            let u = profile_u(seeded(s));
            assert!((u.g[0] - s.powi(-3) * u.v.powi(3)).abs() < 1e-10 * u.g[0].abs().max(1e-300));
            assert!((-u.lap + 3.0 * s.powi(-4) * u.v.powi(5)).abs() < 1e-10 * u.lap.abs().max(1e-300));
        }
    }

    #[test]
    fn w_limits_are_finite() {
        assert!((profile_w_derivatives(1e-9).0 + std::f64::consts::PI).abs() < 1e-6);
        assert!((profile_w_derivatives(1e7).0 + 21.0 / 4.0).abs() < 1e-10);
    }

    #[test]
    fn cutoff_ends() {
        let c = Cutoff::new(0.25, 0.5).unwrap();
        assert_eq!(c.value(0.1), 1.0);
        assert_eq!(c.value(0.6), 0.0);
        let m = c.value(0.375);
        assert!((m - 0.5).abs() < 1e-15);
    }
}
