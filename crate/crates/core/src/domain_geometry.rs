//! Domains centered at the origin, radial and Cartesian grids, and quadrature on balls
//! and spheres.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec3::{self, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("sphere of radius {radius} around {center:?} leaves the domain (room {room})")]
    SphereExitsDomain { center: Point, radius: f64, room: f64 },
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Point),
    #[error("boundary radius function is not a star-shaped graph: {0}")]
    NotStarShaped(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// A scalar function that can be evaluated anywhere it is defined.
pub trait Field3: Sync {
    fn value(&self, p: Point) -> f64;
}

impl<F: Fn(Point) -> f64 + Sync> Field3 for F {
    fn value(&self, p: Point) -> f64 {
        self(p)
    }
}

/// One term `c·ωₓᵃ·ω_yᵇ·ω_zᶜ` of a boundary radius function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusTerm {
    pub powers: [u32; 3],
    pub coeff: f64,
}

/// Boundary radius as a polynomial in the direction cosines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRadius {
    pub terms: Vec<RadiusTerm>,
}

impl BoundaryRadius {
    pub fn constant(r: f64) -> Self {
        Self { terms: vec![RadiusTerm { powers: [0, 0, 0], coeff: r }] }
    }

    /// Radius in the unit direction `w`.
    pub fn eval(&self, w: Point) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * w[0].powi(t.powers[0] as i32)
                    * w[1].powi(t.powers[1] as i32)
                    * w[2].powi(t.powers[2] as i32)
            })
            .sum()
    }

    /// Gradient of the polynomial extension at `w`.
    fn poly_grad(&self, w: Point) -> Point {
        let mut g = [0.0; 3];
        for t in &self.terms {
            for i in 0..3 {
                if t.powers[i] == 0 {
                    continue;
                }
                let mut prod = t.coeff * t.powers[i] as f64;
                for j in 0..3 {
                    let p = if i == j { t.powers[j] - 1 } else { t.powers[j] };
                    prod *= w[j].powi(p as i32);
                }
                g[i] += prod;
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    UnitBall,
    StarShaped(BoundaryRadius),
}

/// Outcome of the star-shape test on sampled boundary points.
#[derive(Debug, Clone, PartialEq)]
pub struct StarShapeCertificate {
    pub min_radius: f64,
    /// Minimum of `⟨x, ν(x)⟩` over the sampled boundary points.
    pub min_support: f64,
    pub passed: bool,
}

/// Domain centered at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
}

impl Domain {
    pub fn unit_ball() -> Self {
        Self { kind: DomainKind::UnitBall }
    }

    /// Star-shaped domain; rejected unless the certificate passes.
    pub fn star_shaped(radius: BoundaryRadius) -> Result<Self, GeometryError> {
        let cert = star_shape_certificate(&radius, &SphereRule::new(32, 64));
        if !cert.passed {
            return Err(GeometryError::NotStarShaped(format!(
                "min radius {:.3e}, min <x,nu> {:.3e}",
                cert.min_radius, cert.min_support
            )));
        }
        Ok(Self { kind: DomainKind::StarShaped(radius) })
    }

    /// Ball of radius `r` as a star-shaped domain.
    pub fn ball(r: f64) -> Result<Self, GeometryError> {
        Self::star_shaped(BoundaryRadius::constant(r))
    }

    pub fn boundary_radius(&self, w: Point) -> f64 {
        match &self.kind {
            DomainKind::UnitBall => 1.0,
            DomainKind::StarShaped(b) => b.eval(w),
        }
    }

    /// Radius when the domain is a ball, `None` otherwise.
    pub fn ball_radius(&self) -> Option<f64> {
        match &self.kind {
            DomainKind::UnitBall => Some(1.0),
            DomainKind::StarShaped(b) => {
                if b.terms.iter().all(|t| t.powers == [0, 0, 0]) {
                    Some(b.terms.iter().map(|t| t.coeff).sum())
                } else {
                    None
                }
            }
        }
    }

    pub fn is_unit_ball(&self) -> bool {
        self.ball_radius().map_or(false, |r| (r - 1.0).abs() < 1e-15)
    }

    pub fn contains(&self, p: Point) -> bool {
        let r = vec3::norm(p);
        if r == 0.0 {
            return true;
        }
        r < self.boundary_radius(vec3::scale(p, 1.0 / r))
    }

    pub fn boundary_point(&self, w: Point) -> Point {
        vec3::scale(w, self.boundary_radius(w))
    }

    /// Radial projection of `p ≠ 0` onto the boundary.
    pub fn project_to_boundary(&self, p: Point) -> Point {
        let w = vec3::normalize(p);
        let w = if vec3::norm2(w) == 0.0 { [1.0, 0.0, 0.0] } else { w };
        self.boundary_point(w)
    }

    /// Outer unit normal at the boundary point in direction `w`.
    pub fn normal(&self, w: Point) -> Point {
        match &self.kind {
            DomainKind::UnitBall => w,
            DomainKind::StarShaped(b) => {
                let r = b.eval(w);
                let g = b.poly_grad(w);
                let gt = vec3::axpy(g, -vec3::dot(w, g), w);
                vec3::normalize(vec3::axpy(w, -1.0 / r, gt))
            }
        }
    }

    pub fn max_radius(&self) -> f64 {
        match &self.kind {
            DomainKind::UnitBall => 1.0,
            DomainKind::StarShaped(b) => {
                let rule = SphereRule::new(32, 64);
                rule.points.iter().map(|&w| b.eval(w)).fold(0.0, f64::max)
            }
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn dist_to_boundary(&self, p: Point) -> f64 {
        if let Some(r) = self.ball_radius() {
            return r - vec3::norm(p);
        }
        let rule = SphereRule::new(64, 128);
        let d = rule
            .points
            .iter()
            .map(|&w| vec3::dist(self.boundary_point(w), p))
            .fold(f64::INFINITY, f64::min);
        if self.contains(p) {
            d
        } else {
            -d
        }
    }
}

/// Checks positivity of the radius function and of `⟨x, ν⟩` on the rule's directions.
pub fn star_shape_certificate(b: &BoundaryRadius, rule: &SphereRule) -> StarShapeCertificate {
    let mut min_radius = f64::INFINITY;
    let mut min_support = f64::INFINITY;
    for &w in &rule.points {
        let r = b.eval(w);
        min_radius = min_radius.min(r);
        if r > 0.0 {
            let g = b.poly_grad(w);
            let gt = vec3::axpy(g, -vec3::dot(w, g), w);
            let n = vec3::normalize(vec3::axpy(w, -1.0 / r, gt));
            min_support = min_support.min(r * vec3::dot(w, n));
        } else {
            min_support = min_support.min(r);
        }
    }
    let passed = min_radius > 0.0 && min_support > 0.0 && min_radius.is_finite();
    StarShapeCertificate { min_radius, min_support, passed }
}

/// Ordered radii in `(0, R]` with a geometric cluster near the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
}

impl RadialGrid {
    /// Validates `nodes`: strictly increasing, positive, first node at most `10⁻³·R`.
    pub fn new(nodes: Vec<f64>) -> Result<Self, GeometryError> {
        if nodes.len() < 3 {
            return Err(GeometryError::InvalidGrid("fewer than 3 radial nodes".into()));
        }
        if nodes[0] <= 0.0 {
            return Err(GeometryError::InvalidGrid("first node must be positive".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GeometryError::InvalidGrid("nodes not strictly increasing".into()));
        }
        let r = *nodes.last().unwrap();
        if nodes[0] > 1e-3 * r {
            return Err(GeometryError::InvalidGrid(format!(
                "first node {} above 1e-3 R = {}",
                nodes[0],
                1e-3 * r
            )));
        }
        Ok(Self { nodes })
    }

    /// `n_uniform` equal steps up to `r_max`, preceded by `n_cluster` geometric nodes
    /// from `r_min` up to the first uniform step.
    pub fn graded(r_max: f64, n_uniform: usize, r_min: f64, n_cluster: usize) -> Result<Self, GeometryError> {
        let h = r_max / n_uniform as f64;
        let mut nodes = Vec::with_capacity(n_uniform + n_cluster);
        if n_cluster > 0 && r_min < h {
            let q = (h / r_min).powf(1.0 / n_cluster as f64);
            let mut r = r_min;
            for _ in 0..n_cluster {
                nodes.push(r);
                r *= q;
            }
        }
        for i in 1..=n_uniform {
            nodes.push(h * i as f64);
        }
        *nodes.last_mut().unwrap() = r_max;
        Self::new(nodes)
    }

    /// Geometric nodes from `r_min` to `r_switch` with `per_decade` nodes per decade,
    /// then uniform steps no longer than the last geometric gap up to `r_max`.
    pub fn log_uniform(r_max: f64, r_min: f64, r_switch: f64, per_decade: usize) -> Result<Self, GeometryError> {
        let decades = (r_switch / r_min).log10();
        let n_geo = (decades * per_decade as f64).ceil().max(1.0) as usize;
        let q = (r_switch / r_min).powf(1.0 / n_geo as f64);
        let mut nodes: Vec<f64> = (0..=n_geo).map(|i| r_min * q.powi(i as i32)).collect();
        let gap = r_switch * (1.0 - 1.0 / q);
        let n_uni = ((r_max - r_switch) / gap).ceil().max(1.0) as usize;
        let h = (r_max - r_switch) / n_uni as f64;
        for i in 1..=n_uni {
            nodes.push(r_switch + h * i as f64);
        }
        *nodes.last_mut().unwrap() = r_max;
        Self::new(nodes)
    }

    pub fn outer_radius(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Node class on a Cartesian grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    /// Exterior node adjacent to an interior node; carries a Dirichlet value.
    Boundary,
    Exterior,
}

/// Cubic lattice `{k·h : |k| ≤ m}³` covering a domain.
#[derive(Debug, Clone)]
pub struct Grid3D {
    pub spacing: f64,
    /// Nodes per axis run over `−m..=m`.
    pub half: usize,
    pub kind: Vec<NodeKind>,
    /// Unknown index of each interior node, `u32::MAX` elsewhere.
    pub unknown: Vec<u32>,
    /// Linear indices of the interior nodes.
    pub interior: Vec<usize>,
    pub domain: Domain,
}

impl Grid3D {
    pub fn new(domain: &Domain, spacing: f64) -> Result<Self, GeometryError> {
        if !(spacing > 0.0) {
            return Err(GeometryError::InvalidGrid("spacing must be positive".into()));
        }
        let half = (domain.max_radius() / spacing).ceil() as usize + 2;
        let n = 2 * half + 1;
        if n.pow(3) > 400_000_000 {
            return Err(GeometryError::InvalidGrid(format!("{} nodes per axis is too many", n)));
        }
        let mut kind = vec![NodeKind::Exterior; n * n * n];
        let mut unknown = vec![u32::MAX; n * n * n];
        let mut interior = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let idx = (i * n + j) * n + k;
                    let p = [
                        (i as f64 - half as f64) * spacing,
                        (j as f64 - half as f64) * spacing,
                        (k as f64 - half as f64) * spacing,
                    ];
                    if i > 0 && j > 0 && k > 0 && i + 1 < n && j + 1 < n && k + 1 < n && domain.contains(p) {
                        kind[idx] = NodeKind::Interior;
                        unknown[idx] = interior.len() as u32;
                        interior.push(idx);
                    }
                }
            }
        }
        let grid_n = n;
        for &idx in &interior {
            for nb in neighbors6(idx, grid_n) {
                if kind[nb] == NodeKind::Exterior {
                    kind[nb] = NodeKind::Boundary;
                }
            }
        }
        Ok(Self { spacing, half, kind, unknown, interior, domain: domain.clone() })
    }

    pub fn n(&self) -> usize {
        2 * self.half + 1
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.n();
        (i * n + j) * n + k
    }

    pub fn ijk(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n();
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    pub fn point(&self, idx: usize) -> Point {
        let (i, j, k) = self.ijk(idx);
        let m = self.half as f64;
        [
            (i as f64 - m) * self.spacing,
            (j as f64 - m) * self.spacing,
            (k as f64 - m) * self.spacing,
        ]
    }

    pub fn neighbors6(&self, idx: usize) -> [usize; 6] {
        neighbors6(idx, self.n())
    }

    pub fn num_nodes(&self) -> usize {
        self.kind.len()
    }
}

fn neighbors6(idx: usize, n: usize) -> [usize; 6] {
    [idx - n * n, idx + n * n, idx - n, idx + n, idx - 1, idx + 1]
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Latitude–longitude product rule on the unit sphere: Gauss–Legendre in `cos θ`,
/// uniform in `φ`. Weights sum to `4π`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (mu, wmu) = gauss_legendre(n_theta);
        let mut points = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        for (&c, &wc) in mu.iter().zip(&wmu) {
            let s = (1.0 - c * c).sqrt();
            for k in 0..n_phi {
                let phi = (k as f64 + 0.5) * dphi;
                points.push([s * phi.cos(), s * phi.sin(), c]);
                weights.push(wc * dphi);
            }
        }
        Self { points, weights }
    }

    /// `∫_{S²} f dσ`.
    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

impl Default for SphereRule {
    fn default() -> Self {
        Self::new(32, 64)
    }
}

/// Mean of `field` over `∂B(center, r)`: the surface integral divided by `ω₂r²`.
pub fn sphere_average(
    field: &dyn Field3,
    domain: &Domain,
    center: Point,
    r: f64,
    rule: &SphereRule,
) -> Result<f64, GeometryError> {
    let room = domain.dist_to_boundary(center);
    if r > room * (1.0 + 1e-12) {
        return Err(GeometryError::SphereExitsDomain { center, radius: r, room });
    }
    let total = rule.integrate(|w| field.value(vec3::axpy(center, r, w)));
    Ok(total / crate::OMEGA2)
}

/// Composite Simpson rule on arbitrary increasing abscissae.
///
/// Pairs of intervals use the exact quadratic through three nodes; a trailing single
/// interval uses the quadratic through the last three nodes.
pub fn simpson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
    }
    let mut s = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        let hs = h0 + h1;
        s += hs / 6.0
            * ((2.0 - h1 / h0) * y[i] + hs * hs / (h0 * h1) * y[i + 1] + (2.0 - h0 / h1) * y[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        // last interval [x_{n-2}, x_{n-1}] from the quadratic through the last three nodes
        let (x0, x1, x2) = (x[n - 3], x[n - 2], x[n - 1]);
        let (y0, y1, y2) = (y[n - 3], y[n - 2], y[n - 1]);
        let h1 = x1 - x0;
        let h2 = x2 - x1;
        s += h2 / 6.0
            * (-(h2 * h2) / (h1 * (h1 + h2)) * y0
                + (3.0 + h2 / h1) * y1
                + (2.0 * h2 + 3.0 * h1) / (h1 + h2) * y2);
    }
    s
}

/// `4π ∫₀^R f(r) w(r) r² dr` for samples on a radial grid; the segment `[0, r₀]` uses
/// the value at `r₀`.
pub fn volume_integral_radial(grid: &RadialGrid, values: &[f64], weight: Option<&dyn Fn(f64) -> f64>) -> Result<f64, GeometryError> {
    if values.len() != grid.len() {
        return Err(GeometryError::ShapeMismatch(format!(
            "{} values on {} nodes",
            values.len(),
            grid.len()
        )));
    }
    let mut x = Vec::with_capacity(grid.len() + 1);
    let mut y = Vec::with_capacity(grid.len() + 1);
    x.push(0.0);
    y.push(0.0);
    for (&r, &v) in grid.nodes.iter().zip(values) {
        let w = weight.map_or(1.0, |f| f(r));
        x.push(r);
        y.push(v * w * r * r);
    }
    Ok(4.0 * std::f64::consts::PI * simpson(&x, &y))
}

/// Quadrature for volume integrals over a star-shaped domain in polar coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeQuadrature {
    pub sphere: SphereRule,
    /// Number of radial Simpson intervals (rounded up to even).
    pub radial_intervals: usize,
}

impl Default for VolumeQuadrature {
    fn default() -> Self {
        Self { sphere: SphereRule::default(), radial_intervals: 200 }
    }
}

/// `∫_Ω field·weight dx` as `∫_{S²} ∫₀^{R(ω)} f(rω) r² dr dω`.
pub fn volume_integral(
    field: &dyn Field3,
    domain: &Domain,
    weight: Option<&dyn Fn(Point) -> f64>,
    quad: &VolumeQuadrature,
) -> f64 {
    let n = quad.radial_intervals + quad.radial_intervals % 2;
    quad.sphere.integrate(|w| {
        let rmax = domain.boundary_radius(w);
        let h = rmax / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let r = h * i as f64;
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            if r == 0.0 {
                continue;
            }
            let p = vec3::scale(w, r);
            let wt = weight.map_or(1.0, |f| f(p));
            s += c * field.value(p) * wt * r * r;
        }
        s * h / 3.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_rule_weights_sum_to_area() {
        let r = SphereRule::default();
        assert!((r.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn simpson_exact_on_quadratics_nonuniform() {
        let x = [0.0, 0.1, 0.35, 0.4, 0.8, 1.0];
        let y: Vec<f64> = x.iter().map(|t| t * t - 2.0 * t).collect();
        assert!((simpson(&x, &y) - (1.0 / 3.0 - 1.0)).abs() < 1e-13);
        let u: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let c: Vec<f64> = u.iter().map(|t| t * t * t).collect();
        assert!((simpson(&u, &c) - 0.25).abs() < 1e-14);
        let x2 = [0.0, 0.2, 0.5, 1.0];
        let y2: Vec<f64> = x2.iter().map(|t| 3.0 * t * t + 1.0).collect();
        assert!((simpson(&x2, &y2) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn sphere_average_examples() {
        let d = Domain::unit_ball();
        let rule = SphereRule::default();
        let c = sphere_average(&|_p: Point| 2.5, &d, [0.1, 0.0, 0.0], 0.3, &rule).unwrap();
        assert!((c - 2.5).abs() < 1e-13);
        let q = sphere_average(&|p: Point| vec3::norm2(p), &d, [0.0; 3], 0.5, &rule).unwrap();
        assert!((q - 0.25).abs() < 1e-13);
        let l = sphere_average(&|p: Point| p[0], &d, [0.0; 3], 0.7, &rule).unwrap();
        assert!(l.abs() < 1e-14);
        let e = sphere_average(&|_p: Point| 1.0, &d, [0.5, 0.0, 0.0], 0.6, &rule);
        assert!(matches!(e, Err(GeometryError::SphereExitsDomain { .. })));
    }

    #[test]
    fn volume_integral_examples() {
        let d = Domain::unit_ball();
        let q = VolumeQuadrature::default();
        let v = volume_integral(&|_p: Point| 1.0, &d, None, &q);
        assert!((v - 4.0 * PI / 3.0).abs() < 1e-10);
        let m = volume_integral(&|p: Point| vec3::norm(p), &d, None, &q);
        assert!((m - PI).abs() < 1e-10);
    }

    #[test]
    fn radial_volume_integral_of_linear_function() {
        let g = RadialGrid::graded(1.0, 400, 1e-6, 20).unwrap();
        let vals: Vec<f64> = g.nodes.clone();
        let v = volume_integral_radial(&g, &vals, None).unwrap();
        assert!((v - PI).abs() < 1e-9);
    }

    #[test]
    fn star_shape_certificate_cases() {
        let rule = SphereRule::default();
        assert!(star_shape_certificate(&BoundaryRadius::constant(1.0), &rule).passed);
        let dumbbell = BoundaryRadius {
            terms: vec![
                RadiusTerm { powers: [0, 0, 2], coeff: 1.5 },
                RadiusTerm { powers: [0, 0, 0], coeff: -0.1 },
            ],
        };
        assert!(!star_shape_certificate(&dumbbell, &rule).passed);
        assert!(Domain::star_shaped(dumbbell).is_err());
        let peanut = BoundaryRadius {
            terms: vec![
                RadiusTerm { powers: [0, 0, 0], coeff: 0.8 },
                RadiusTerm { powers: [0, 0, 2], coeff: 0.3 },
            ],
        };
        assert!(star_shape_certificate(&peanut, &rule).passed);
    }

    #[test]
    fn grid_classifies_nodes() {
        let g = Grid3D::new(&Domain::unit_ball(), 0.25).unwrap();
        for &idx in &g.interior {
            for nb in g.neighbors6(idx) {
                assert_ne!(g.kind[nb], NodeKind::Exterior);
            }
            assert!(vec3::norm(g.point(idx)) < 1.0);
        }
        assert_eq!(g.kind[g.index(g.half, g.half, g.half)], NodeKind::Interior);
    }

    #[test]
    fn normals_of_star_domain_are_unit_and_outward() {
        let b = BoundaryRadius {
            terms: vec![
                RadiusTerm { powers: [0, 0, 0], coeff: 1.0 },
                RadiusTerm { powers: [1, 0, 0], coeff: 0.2 },
            ],
        };
        let d = Domain::star_shaped(b).unwrap();
        let rule = SphereRule::new(8, 16);
        for &w in &rule.points {
            let n = d.normal(w);
            assert!((vec3::norm(n) - 1.0).abs() < 1e-12);
            assert!(vec3::dot(n, w) > 0.0);
        }
    }
}
