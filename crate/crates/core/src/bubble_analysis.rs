//! The standard bubble `U(x) = (1 + |x|²/3)^{-1/2}`, spherical-average profiles and
//! the greedy extraction of concentration points.
//!
//! `U` solves `ΔU = U⁵` in `R³` and the critical rescaling `μ^{-1/2}U((x − c)/μ)` is again
//! a solution. Concentration points are extracted from discrete local maxima of a
//! sampled field by a greedy sweep in decreasing height.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain_geometry::{sphere_average, Domain, Field3, GeometryError, Grid3D, NodeKind, SphereRule};
use crate::jet::Jet;
use crate::vec3::{self, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BubbleError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid input: {0}")]
    Input(String),
}

/// Points `xᵢ` with weights `λᵢ > 0`, as in `G = Σ λᵢ𝒢(xᵢ, ·)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleConfiguration {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Optional concentration scale `ε` used by constructors.
    pub scale: Option<f64>,
}

impl BubbleConfiguration {
    /// Validated configuration: positive weights, distinct interior points.
    pub fn new(points: Vec<Point>, weights: Vec<f64>, domain: &Domain) -> Result<Self, BubbleError> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(BubbleError::Input(format!("{} points with {} weights", points.len(), weights.len())));
        }
        if let Some(w) = weights.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
            return Err(BubbleError::Input(format!("weight {w} is not positive")));
        }
        for (i, &p) in points.iter().enumerate() {
            if !domain.contains(p) {
                return Err(GeometryError::OutsideDomain(p).into());
            }
            if points[..i].iter().any(|&q| vec3::dist(p, q) == 0.0) {
                return Err(BubbleError::Input(format!("repeated point {p:?}")));
            }
        }
        Ok(Self { points, weights, scale: None })
    }

    pub fn with_scale(mut self, eps: f64) -> Self {
        self.scale = Some(eps);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `μ^{-1/2}(1 + |x − c|²/(3μ²))^{-1/2}`.
pub fn standard_bubble(x: Point, center: Point, mu: f64) -> f64 {
    1.0 / (mu * (1.0 + vec3::norm2(vec3::sub(x, center)) / (3.0 * mu * mu))).sqrt()
}

/// The rescaled bubble as a jet, so `ΔU` comes out exactly.
pub fn standard_bubble_jet(x: Point, center: Point, mu: f64) -> Jet {
    ((Jet::dist2(x, center) / (3.0 * mu * mu) + 1.0) * mu).sqrt().recip()
}

/// Supremum of `|ΔU − U⁵|` over a lattice in a ball, by the 7-point stencil and by jets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubblePdeCheck {
    pub finite_difference_sup: f64,
    pub jet_sup: f64,
    pub points: usize,
}

/// Checks `ΔU = U⁵` for the bubble of scale `mu` at the origin on the lattice
/// `spacing·Z³ ∩ B(0, radius)`.
pub fn bubble_pde_check(mu: f64, radius: f64, spacing: f64) -> BubblePdeCheck {
    let m = (radius / spacing).floor() as i64;
    let c = [0.0; 3];
    let u = |p: Point| standard_bubble(p, c, mu);
    let (fd, jet, n) = (-m..=m)
        .into_par_iter()
        .map(|i| {
            let mut acc = (0.0f64, 0.0f64, 0usize);
            for j in -m..=m {
                for k in -m..=m {
                    let p = [i as f64 * spacing, j as f64 * spacing, k as f64 * spacing];
                    if vec3::norm(p) > radius {
                        continue;
                    }
                    let u0 = u(p);
                    let mut lap = 6.0 * u0;
                    for d in 0..3 {
                        let mut a = p;
                        a[d] += spacing;
                        let mut b = p;
                        b[d] -= spacing;
                        lap -= u(a) + u(b);
                    }
                    lap /= spacing * spacing;
                    let j5 = u0.powi(5);
                    acc.0 = acc.0.max((lap - j5).abs());
                    let jt = standard_bubble_jet(p, c, mu);
                    acc.1 = acc.1.max((jt.lap - jt.v.powi(5)).abs());
                    acc.2 += 1;
                }
            }
            acc
        })
        .reduce(|| (0.0, 0.0, 0), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2 + b.2));
    BubblePdeCheck { finite_difference_sup: fd, jet_sup: jet, points: n }
}

/// `ψ(r) = r^{1/2}·(mean of u over ∂B(center, r))` at each radius.
pub fn spherical_profile(
    u: &dyn Field3,
    domain: &Domain,
    center: Point,
    radii: &[f64],
    rule: &SphereRule,
) -> Result<Vec<(f64, f64)>, BubbleError> {
    radii
        .iter()
        .map(|&r| Ok((r, r.sqrt() * sphere_average(u, domain, center, r, rule)?)))
        .collect()
}

/// Largest sampled `r ≥ inner_cutoff` with the discrete `ψ′ ≤ 0` on `[inner_cutoff, r]`;
/// the last radius when `ψ` never increases.
pub fn critical_radius(profile: &[(f64, f64)], inner_cutoff: f64) -> Result<f64, BubbleError> {
    let tail: Vec<_> = profile.iter().copied().filter(|&(r, _)| r >= inner_cutoff).collect();
    if tail.len() < 3 {
        return Err(BubbleError::Input(format!("{} profile samples beyond the cutoff, need 3", tail.len())));
    }
    if tail.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(BubbleError::Input("profile radii must increase".into()));
    }
    Ok(tail
        .windows(2)
        .find(|w| w[1].1 > w[0].1)
        .map_or(tail[tail.len() - 1].0, |w| w[0].0))
}

/// Radius of the largest sampled value of a profile.
pub fn profile_argmax(profile: &[(f64, f64)]) -> Option<f64> {
    profile.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)).map(|p| p.0)
}

/// Options for [`extract_concentration_points`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionOptions {
    pub spacing: f64,
    /// The constant in `d(x, ∂Ω)u(x)² ≥ threshold` and the separation conditions.
    pub threshold: f64,
    /// Width, in cells, of the boundary layer excluded from the maxima search.
    pub boundary_layer: f64,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        Self { spacing: 1.0 / 64.0, threshold: 1.0, boundary_layer: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub points: Vec<Point>,
    pub heights: Vec<f64>,
    pub threshold: f64,
    /// `max over grid nodes of (minᵢ |xᵢ − x|)·u(x)²`; diagnostic only.
    pub covering_margin: f64,
    /// Number of discrete local maxima passing the boundary-distance test.
    pub candidates: usize,
    /// `false` when no candidate passed, so the extraction is empty by hypothesis.
    pub hypothesis_met: bool,
}

impl ExtractionResult {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Both separation inequalities, checked exactly on the stored values.
    pub fn separation_holds(&self, domain: &Domain) -> bool {
        let t = self.threshold;
        self.points.iter().zip(&self.heights).enumerate().all(|(i, (&x, &u))| {
            domain.dist_to_boundary(x) * u * u >= t
                && self.points.iter().enumerate().all(|(j, &y)| i == j || vec3::dist(x, y) * u * u >= t)
        })
    }
}

/// Greedy concentration points of a sampled positive field.
///
/// Candidates are strict maxima over the 26 lattice neighbours, away from a boundary
/// layer, with `d(x, ∂Ω)u(x)² ≥ t`. The sweep repeatedly accepts the highest remaining
/// candidate (lowest lattice index on ties) and keeps only candidates `x` with
/// `|xᵢ − x|u(xᵢ)² ≥ t` and `|xᵢ − x|u(x)² ≥ t` for every accepted `xᵢ`.
pub fn extract_concentration_points(
    u: &dyn Field3,
    domain: &Domain,
    opts: &ExtractionOptions,
) -> Result<ExtractionResult, BubbleError> {
    if !(opts.threshold > 0.0) {
        return Err(BubbleError::Input("threshold must be positive".into()));
    }
    let grid = Grid3D::new(domain, opts.spacing)?;
    let n = grid.n();
    let values: Vec<f64> = (0..grid.num_nodes())
        .into_par_iter()
        .map(|i| if grid.kind[i] == NodeKind::Interior { u.value(grid.point(i)) } else { f64::NAN })
        .collect();
    let layer = opts.boundary_layer * opts.spacing;
    let mut cand: Vec<usize> = grid
        .interior
        .par_iter()
        .copied()
        .filter(|&idx| {
            let p = grid.point(idx);
            let v = values[idx];
            let d = domain.dist_to_boundary(p);
            d > layer && d * v * v >= opts.threshold && is_strict_max(&values, idx, n)
        })
        .collect();
    let candidates = cand.len();
    let mut points = Vec::new();
    let mut heights = Vec::new();
    while !cand.is_empty() {
        let &best = cand
            .iter()
            .max_by(|&&a, &&b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
            .expect("non-empty");
        let xb = grid.point(best);
        let ub = values[best];
        points.push(xb);
        heights.push(ub);
        cand.retain(|&idx| {
            let x = grid.point(idx);
            let v = values[idx];
            points.iter().zip(&heights).all(|(&xi, &ui)| {
                let d = vec3::dist(xi, x);
                d * ui * ui >= opts.threshold && d * v * v >= opts.threshold
            })
        });
    }
    let covering_margin = if points.is_empty() {
        0.0
    } else {
        grid.interior
            .par_iter()
            .map(|&idx| {
                let x = grid.point(idx);
                let d = points.iter().map(|&p| vec3::dist(p, x)).fold(f64::INFINITY, f64::min);
                d * values[idx] * values[idx]
            })
            .reduce(|| 0.0, f64::max)
    };
    Ok(ExtractionResult {
        hypothesis_met: candidates > 0,
        points,
        heights,
        threshold: opts.threshold,
        covering_margin,
        candidates,
    })
}

fn is_strict_max(values: &[f64], idx: usize, n: usize) -> bool {
    let v = values[idx];
    let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            for dk in -1i64..=1 {
                if di == 0 && dj == 0 && dk == 0 {
                    continue;
                }
                let (a, b, c) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                if a < 0 || b < 0 || c < 0 || a >= n as i64 || b >= n as i64 || c >= n as i64 {
                    return false;
                }
                let w = values[((a as usize) * n + b as usize) * n + c as usize];
                // non-interior neighbours carry NaN and never beat the centre
                if w >= v {
                    return false;
                }
            }
        }
    }
    true
}

/// Options for [`rescale_and_compare`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    /// Comparison radius `R` in rescaled coordinates.
    pub radius: f64,
    pub radial_samples: usize,
    pub sphere: SphereRule,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { radius: 5.0, radial_samples: 100, sphere: SphereRule::new(8, 16) }
    }
}

/// `sup_{|x| ≤ R} |μ^{1/2}u(p + μx) − (1 + |x|²/3)^{-1/2}|`, with `μ = u(p)^{-2}` by default.
pub fn rescale_and_compare(
    u: &dyn Field3,
    domain: &Domain,
    point: Point,
    mu: Option<f64>,
    opts: &CompareOptions,
) -> Result<f64, BubbleError> {
    let mu = match mu {
        Some(m) => m,
        None => {
            let v = u.value(point);
            if !(v > 0.0) {
                return Err(BubbleError::Input(format!("u({point:?}) = {v} is not positive")));
            }
            v.powi(-2)
        }
    };
    if !(mu > 0.0) {
        return Err(BubbleError::Input("scale must be positive".into()));
    }
    let room = domain.dist_to_boundary(point);
    if opts.radius * mu > room {
        return Err(GeometryError::SphereExitsDomain { center: point, radius: opts.radius * mu, room }.into());
    }
    let n = opts.radial_samples.max(1);
    let dev = |x: Point| {
        let y = vec3::axpy(point, mu, x);
        (mu.sqrt() * u.value(y) - (1.0 + vec3::norm2(x) / 3.0).powf(-0.5)).abs()
    };
    let mut sup = dev([0.0; 3]);
    for i in 1..=n {
        let r = opts.radius * i as f64 / n as f64;
        for &w in &opts.sphere.points {
            sup = sup.max(dev(vec3::scale(w, r)));
        }
    }
    Ok(sup)
}
