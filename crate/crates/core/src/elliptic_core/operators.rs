use std::sync::Arc;

use rayon::prelude::*;

use crate::domain_geometry::{Domain, Field3, Grid3D, NodeKind, RadialGrid};
use crate::vec3::{self, Point};

use super::coefficient::CoefficientH;
use super::fields::{solve_tridiagonal, ScalarField3D, ScalarFieldRadial};
use super::EllipticError;

/// Radial analyst Laplacian `−(u″ + 2u′/r)` by three-point differences on the
/// non-uniform grid. The first node uses the even reflection `u(−r₀) = u(r₀)`; the last
/// node uses the one-sided quadratic through the last three nodes.
pub fn apply_laplacian_radial(u: &ScalarFieldRadial) -> Result<ScalarFieldRadial, EllipticError> {
    let x = &u.grid.nodes;
    let y = &u.values;
    let n = x.len();
    if n < 3 {
        return Err(EllipticError::Input("radial Laplacian needs at least 3 nodes".into()));
    }
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let (xm, ym) = if i == 0 { (-x[0], y[0]) } else { (x[i - 1], y[i - 1]) };
        let hm = x[i] - xm;
        let hp = x[i + 1] - x[i];
        let d2 = 2.0 * (y[i + 1] / (hp * (hm + hp)) - y[i] / (hm * hp) + ym / (hm * (hm + hp)));
        let d1 = -hp / (hm * (hm + hp)) * ym + (hp - hm) / (hm * hp) * y[i] + hm / (hp * (hm + hp)) * y[i + 1];
        out[i] = -(d2 + 2.0 * d1 / x[i]);
    }
    let (h1, h2) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    let (y0, y1, y2) = (y[n - 3], y[n - 2], y[n - 1]);
    let d2 = 2.0 * (y0 / (h1 * (h1 + h2)) - y1 / (h1 * h2) + y2 / (h2 * (h1 + h2)));
    let d1 = y0 * h2 / (h1 * (h1 + h2)) - y1 * (h1 + h2) / (h1 * h2) + y2 * (h1 + 2.0 * h2) / (h2 * (h1 + h2));
    out[n - 1] = -(d2 + 2.0 * d1 / x[n - 1]);
    Ok(ScalarFieldRadial::from_values(u.grid.clone(), out))
}

/// Negated 7-point stencil on the interior nodes; other nodes are set to zero.
pub fn apply_laplacian_3d(u: &ScalarField3D) -> ScalarField3D {
    let g = &u.grid;
    let inv = 1.0 / (g.spacing * g.spacing);
    let mut out = vec![0.0; g.num_nodes()];
    let vals: Vec<(usize, f64)> = g
        .interior
        .par_iter()
        .map(|&i| {
            let s: f64 = g.neighbors6(i).iter().map(|&j| u.values[j]).sum();
            (i, (6.0 * u.values[i] - s) * inv)
        })
        .collect();
    for (i, v) in vals {
        out[i] = v;
    }
    ScalarField3D { grid: u.grid.clone(), values: out }
}

/// Negated 7-point stencil of an evaluable field at `p` with step `h`.
pub fn laplacian_7pt(f: &dyn Field3, p: Point, h: f64) -> f64 {
    let mut s = 6.0 * f.value(p);
    for a in 0..3 {
        let mut q = p;
        q[a] += h;
        s -= f.value(q);
        q[a] = p[a] - h;
        s -= f.value(q);
    }
    s / (h * h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub spacing: f64,
    /// Relative residual `‖b − Ax‖/‖b‖` at which CG stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { spacing: 1.0 / 32.0, tolerance: 1e-10, max_iterations: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `(Δ + h)v = rhs` in `domain`, `v = 0` on `∂Ω`, on a fresh grid.
pub fn solve_dirichlet(
    h: &CoefficientH,
    rhs: &dyn Field3,
    domain: &Domain,
    opts: &SolverOptions,
) -> Result<(ScalarField3D, SolveStats), EllipticError> {
    let grid = Arc::new(Grid3D::new(domain, opts.spacing)?);
    solve_dirichlet_on(grid, h, rhs, None, opts)
}

/// Axis directions in the order of [`Grid3D::neighbors6`].
const AXES: [Point; 6] = [
    [-1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0],
];

/// Smallest allowed boundary fraction `θ`; keeps the ghost weight `1/θ` bounded.
const MIN_THETA: f64 = 1e-6;

/// Fraction `θ ∈ (0, 1]` of the lattice edge from interior `p` along `dir` at which it
/// leaves the domain.
fn boundary_fraction(domain: &Domain, p: Point, dir: Point, h: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..52 {
        let mid = 0.5 * (lo + hi);
        if domain.contains(vec3::axpy(p, mid * h, dir)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).max(MIN_THETA)
}

/// Solves `(Δ + h)v = rhs` with Dirichlet data `boundary` (zero when `None`).
///
/// Each edge leaving the domain uses a ghost value extrapolated linearly through the
/// exact crossing with `∂Ω`, which only modifies the diagonal and the right-hand side:
/// the system stays symmetric and the solution is second-order accurate. Boundary nodes
/// store the averaged ghost values. Jacobi-preconditioned conjugate gradients.
pub fn solve_dirichlet_on(
    grid: Arc<Grid3D>,
    h: &CoefficientH,
    rhs: &dyn Field3,
    boundary: Option<&dyn Field3>,
    opts: &SolverOptions,
) -> Result<(ScalarField3D, SolveStats), EllipticError> {
    let g = &*grid;
    let hs = g.spacing;
    let inv = 1.0 / (hs * hs);
    let nodes = g.num_nodes();
    let m = g.interior.len();
    let hv: Vec<f64> = g.interior.par_iter().map(|&i| h.eval(g.point(i))).collect();
    // per interior node: boundary arms as (neighbour, θ, boundary value)
    let arms: Vec<Vec<(usize, f64, f64)>> = g
        .interior
        .par_iter()
        .map(|&i| {
            let p = g.point(i);
            g.neighbors6(i)
                .iter()
                .zip(AXES)
                .filter(|(&j, _)| g.kind[j] != NodeKind::Interior)
                .map(|(&j, dir)| {
                    let theta = boundary_fraction(&g.domain, p, dir, hs);
                    let ub = boundary.map_or(0.0, |bd| bd.value(vec3::axpy(p, theta * hs, dir)));
                    (j, theta, ub)
                })
                .collect()
        })
        .collect();
    let diag: Vec<f64> = (0..m)
        .map(|k| 6.0 * inv + hv[k] + arms[k].iter().map(|&(_, t, _)| (1.0 - t) / t * inv).sum::<f64>())
        .collect();
    if let Some(&d) = diag.iter().find(|&&d| d <= 0.0) {
        return Err(EllipticError::IndefiniteSystem(d));
    }
    let b: Vec<f64> = g
        .interior
        .par_iter()
        .enumerate()
        .map(|(k, &i)| rhs.value(g.point(i)) + arms[k].iter().map(|&(_, t, ub)| ub / t * inv).sum::<f64>())
        .collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        y.par_iter_mut().enumerate().for_each(|(k, yk)| {
            let i = g.interior[k];
            let mut s = 0.0;
            for j in g.neighbors6(i) {
                let u = g.unknown[j];
                if u != u32::MAX {
                    s -= x[u as usize];
                }
            }
            *yk = s * inv + diag[k] * x[k];
        });
    };
    let mut x = vec![0.0; m];
    let stats = pcg(apply, &diag, &b, &mut x, opts.tolerance, opts.max_iterations)?;
    let mut values = vec![0.0; nodes];
    let mut counts = vec![0u32; nodes];
    for (k, &i) in g.interior.iter().enumerate() {
        values[i] = x[k];
        for &(j, t, ub) in &arms[k] {
            values[j] += (ub - (1.0 - t) * x[k]) / t;
            counts[j] += 1;
        }
    }
    for (v, &c) in values.iter_mut().zip(&counts) {
        if c > 1 {
            *v /= c as f64;
        }
    }
    Ok((ScalarField3D { grid, values }, stats))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients.
pub(crate) fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats, EllipticError> {
    let m = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![0.0; m];
    apply(x, &mut r);
    r.par_iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; m];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(SolveStats { iterations: it, relative_residual: res });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(EllipticError::IndefiniteSystem(pap / dot(&p, &p)));
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        z.par_iter_mut().zip(&r).zip(diag).for_each(|((zi, ri), d)| *zi = ri / d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        res = dot(&r, &r).sqrt() / bnorm;
    }
    if res <= tol {
        return Ok(SolveStats { iterations: max_iter, relative_residual: res });
    }
    Err(EllipticError::IterationLimit { iterations: max_iter, residual: res })
}

/// Radial Dirichlet solve of `(Δ + h)v = rhs` on the ball of radius `grid.outer_radius()`
/// through `w = r v`, which satisfies `−w″ + h w = r·rhs`, `w(0) = w(R) = 0`.
pub fn solve_dirichlet_radial(
    h: &CoefficientH,
    rhs: &dyn Fn(f64) -> f64,
    grid: &RadialGrid,
) -> Result<ScalarFieldRadial, EllipticError> {
    if !h.is_radial() {
        return Err(EllipticError::NotRadial);
    }
    let x = &grid.nodes;
    let n = x.len();
    let m = n - 1;
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m];
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for i in 0..m {
        let xm = if i == 0 { 0.0 } else { x[i - 1] };
        let hm = x[i] - xm;
        let hp = x[i + 1] - x[i];
        let hr = h.eval_radial(x[i]).unwrap();
        a[i] = -2.0 / (hm * (hm + hp));
        b[i] = 2.0 / (hm * hp) + hr;
        c[i] = -2.0 / (hp * (hm + hp));
        d[i] = x[i] * rhs(x[i]);
    }
    let w = solve_tridiagonal(&a, &b, &c, &d);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(EllipticError::IndefiniteSystem(f64::NAN));
    }
    let mut values: Vec<f64> = w.iter().zip(x).map(|(wi, r)| wi / r).collect();
    values.push(0.0);
    Ok(ScalarFieldRadial::from_values(grid.clone(), values))
}
