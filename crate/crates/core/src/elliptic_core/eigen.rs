use std::sync::Arc;

use crate::domain_geometry::{volume_integral, Domain, Grid3D, VolumeQuadrature};
use crate::vec3::Point;

use super::coefficient::CoefficientH;
use super::EllipticError;

/// Best constant `S` in `‖∇u‖₂² ≥ S‖u‖₆²` on `R³`, `S = 3(π/2)^{4/3}`.
pub const SOBOLEV_CONSTANT: f64 = 5.477904089531331;

#[derive(Debug, Clone, PartialEq)]
pub enum EigenMethod {
    /// `w = r u` on a uniform grid of `(0, R)`; requires radial `h` on a ball.
    Radial { intervals: usize },
    /// Lanczos on the 7-point operator of a Cartesian grid.
    Lanczos { spacing: f64, steps: usize },
    /// Radial when possible, Lanczos otherwise.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityOptions {
    pub method: EigenMethod,
    /// Constant used in the sufficient bound `‖h₋‖_{3/2} < S`.
    pub sobolev_constant: f64,
}

impl Default for CoercivityOptions {
    fn default() -> Self {
        Self { method: EigenMethod::Auto, sobolev_constant: SOBOLEV_CONSTANT }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityReport {
    pub coercive: bool,
    pub smallest_eigenvalue: f64,
    /// `‖h₋‖_{3/2} < S`: sufficient for coercivity, never a disproof.
    pub sufficient_l32_bound: bool,
    pub negative_part_l32: f64,
    pub method: &'static str,
}

/// Smallest Dirichlet eigenvalue of the discrete `Δ + h` and the sufficient
/// `L^{3/2}` test on the negative part of `h`.
pub fn coercivity_check(h: &CoefficientH, domain: &Domain, opts: &CoercivityOptions) -> Result<CoercivityReport, EllipticError> {
    let radial_ok = h.is_radial() && domain.ball_radius().is_some();
    let (lambda, method) = match (&opts.method, radial_ok) {
        (EigenMethod::Radial { intervals }, true) => (radial_eigenvalue(h, domain.ball_radius().unwrap(), *intervals)?, "radial"),
        (EigenMethod::Radial { .. }, false) => return Err(EllipticError::NotRadial),
        (EigenMethod::Auto, true) => (radial_eigenvalue(h, domain.ball_radius().unwrap(), 4000)?, "radial"),
        (EigenMethod::Auto, false) => (lanczos_eigenvalue(h, domain, 1.0 / 24.0, 300)?, "lanczos"),
        (EigenMethod::Lanczos { spacing, steps }, _) => (lanczos_eigenvalue(h, domain, *spacing, *steps)?, "lanczos"),
    };
    let f = |p: Point| (-h.eval(p)).max(0.0).powf(1.5);
    let neg = volume_integral(&f, domain, None, &VolumeQuadrature::default()).powf(2.0 / 3.0);
    Ok(CoercivityReport {
        coercive: lambda > 0.0,
        smallest_eigenvalue: lambda,
        sufficient_l32_bound: neg < opts.sobolev_constant,
        negative_part_l32: neg,
        method,
    })
}

fn radial_eigenvalue(h: &CoefficientH, radius: f64, intervals: usize) -> Result<f64, EllipticError> {
    let n = intervals.max(4);
    let dr = radius / n as f64;
    let off = -1.0 / (dr * dr);
    let diag: Vec<f64> = (1..n).map(|i| 2.0 / (dr * dr) + h.eval_radial(i as f64 * dr).unwrap()).collect();
    let offd = vec![off; n - 2];
    smallest_tridiagonal_eigenvalue(&diag, &offd)
}

fn lanczos_eigenvalue(h: &CoefficientH, domain: &Domain, spacing: f64, steps: usize) -> Result<f64, EllipticError> {
    let grid = Arc::new(Grid3D::new(domain, spacing)?);
    let g = &*grid;
    let inv = 1.0 / (spacing * spacing);
    let m = g.interior.len();
    if m == 0 {
        return Err(EllipticError::Eigen("grid has no interior nodes".into()));
    }
    let hv: Vec<f64> = g.interior.iter().map(|&i| h.eval(g.point(i))).collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        for k in 0..m {
            let i = g.interior[k];
            let mut s = 6.0 * x[k];
            for j in g.neighbors6(i) {
                let u = g.unknown[j];
                if u != u32::MAX {
                    s -= x[u as usize];
                }
            }
            y[k] = s * inv + hv[k] * x[k];
        }
    };
    let k = steps.min(m);
    let mut alpha = Vec::with_capacity(k);
    let mut beta: Vec<f64> = Vec::with_capacity(k);
    let norm0 = (m as f64).sqrt();
    let mut q: Vec<f64> = vec![1.0 / norm0; m];
    let mut q_prev = vec![0.0; m];
    let mut w = vec![0.0; m];
    for j in 0..k {
        apply(&q, &mut w);
        let a: f64 = w.iter().zip(&q).map(|(x, y)| x * y).sum();
        alpha.push(a);
        let b_prev = if j > 0 { beta[j - 1] } else { 0.0 };
        for t in 0..m {
            w[t] -= a * q[t] + b_prev * q_prev[t];
        }
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if j + 1 == k || b < 1e-12 {
            break;
        }
        beta.push(b);
        for t in 0..m {
            q_prev[t] = q[t];
            q[t] = w[t] / b;
        }
    }
    let n = alpha.len();
    beta.truncate(n.saturating_sub(1));
    smallest_tridiagonal_eigenvalue(&alpha, &beta)
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm-count bisection.
pub(crate) fn smallest_tridiagonal_eigenvalue(diag: &[f64], off: &[f64]) -> Result<f64, EllipticError> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(EllipticError::Eigen("inconsistent tridiagonal shape".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let count_below = |x: f64| -> usize {
        let mut c = 0;
        let mut d = 1.0;
        for i in 0..n {
            let o2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            d = diag[i] - x - if i > 0 { o2 / d } else { 0.0 };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                c += 1;
            }
        }
        c
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    let v = 0.5 * (lo + hi);
    if !v.is_finite() {
        return Err(EllipticError::Eigen("bisection produced a non-finite value".into()));
    }
    Ok(v)
}
