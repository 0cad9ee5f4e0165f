use std::sync::Arc;

use crate::domain_geometry::{Field3, Grid3D, NodeKind, RadialGrid};
use crate::vec3::{self, Point};

use super::EllipticError;

/// Radial function sampled on a [`RadialGrid`], evaluated off-grid by cubic Hermite
/// interpolation of values and first derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFieldRadial {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
    /// `u′` at the nodes.
    pub derivs: Vec<f64>,
    /// Whether `derivs` are exact samples rather than spline estimates.
    pub exact_derivs: bool,
}

impl ScalarFieldRadial {
    /// Derivatives are estimated by a natural cubic spline through the values.
    pub fn from_values(grid: RadialGrid, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len());
        let derivs = spline_derivatives(&grid.nodes, &values);
        Self { grid, values, derivs, exact_derivs: false }
    }

    pub fn from_samples(grid: RadialGrid, values: Vec<f64>, derivs: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len());
        assert_eq!(grid.len(), derivs.len());
        Self { grid, values, derivs, exact_derivs: true }
    }

    /// Samples a closed form `f` with derivative `df`.
    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&r| f(r)).collect();
        let derivs = grid.nodes.iter().map(|&r| df(r)).collect();
        Self { grid, values, derivs, exact_derivs: true }
    }

    fn locate(&self, r: f64) -> usize {
        let n = self.grid.nodes.len();
        let i = self.grid.nodes.partition_point(|&x| x <= r);
        i.clamp(1, n - 1) - 1
    }

    /// Value at `r`; below the first node the even extension
    /// `u(r₀) + (r² − r₀²) u′(r₀)/(2r₀)` is used, beyond the last node a linear one.
    pub fn value(&self, r: f64) -> f64 {
        let nodes = &self.grid.nodes;
        let n = nodes.len();
        if r < nodes[0] {
            let r0 = nodes[0];
            return self.values[0] + (r * r - r0 * r0) * self.derivs[0] / (2.0 * r0);
        }
        if r > nodes[n - 1] {
            return self.values[n - 1] + (r - nodes[n - 1]) * self.derivs[n - 1];
        }
        let i = self.locate(r);
        let h = nodes[i + 1] - nodes[i];
        let t = (r - nodes[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.values[i]
            + (t3 - 2.0 * t2 + t) * h * self.derivs[i]
            + (-2.0 * t3 + 3.0 * t2) * self.values[i + 1]
            + (t3 - t2) * h * self.derivs[i + 1]
    }

    /// Value at `r`, refusing to extrapolate below the first node.
    pub fn try_value(&self, r: f64) -> Result<f64, EllipticError> {
        let first = self.grid.nodes[0];
        if r < first * (1.0 - 1e-12) {
            return Err(EllipticError::Extrapolation { r, first });
        }
        Ok(self.value(r))
    }

    /// `u′(r)` of the interpolant.
    pub fn deriv(&self, r: f64) -> f64 {
        let nodes = &self.grid.nodes;
        let n = nodes.len();
        if r < nodes[0] {
            return r * self.derivs[0] / nodes[0];
        }
        if r > nodes[n - 1] {
            return self.derivs[n - 1];
        }
        let i = self.locate(r);
        let h = nodes[i + 1] - nodes[i];
        let t = (r - nodes[i]) / h;
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.values[i]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.derivs[i]
            + (-6.0 * t2 + 6.0 * t) * self.values[i + 1]
            + (3.0 * t2 - 2.0 * t) * h * self.derivs[i + 1])
            / h
    }

    pub fn outer_radius(&self) -> f64 {
        self.grid.outer_radius()
    }

    /// Pointwise map of the values; derivatives are re-estimated.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.grid.nodes.iter().zip(&self.values).map(|(&r, &v)| f(r, v)).collect();
        Self::from_values(self.grid.clone(), values)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

impl Field3 for ScalarFieldRadial {
    fn value(&self, p: Point) -> f64 {
        ScalarFieldRadial::value(self, vec3::norm(p))
    }
}

/// Natural cubic spline slopes at the nodes.
fn spline_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        let s = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![s, s];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    // second derivatives m with m[0] = m[n-1] = 0
    let mut a = vec![0.0; n];
    let mut b = vec![1.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        a[i] = h[i - 1];
        b[i] = 2.0 * (h[i - 1] + h[i]);
        c[i] = h[i];
        d[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    }
    let m = solve_tridiagonal(&a, &b, &c, &d);
    let mut s = vec![0.0; n];
    for i in 0..n - 1 {
        s[i] = (y[i + 1] - y[i]) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0;
    }
    s[n - 1] = (y[n - 1] - y[n - 2]) / h[n - 2] + h[n - 2] * (m[n - 2] + 2.0 * m[n - 1]) / 6.0;
    s
}

/// Thomas algorithm for `aᵢxᵢ₋₁ + bᵢxᵢ + cᵢxᵢ₊₁ = dᵢ`.
pub(crate) fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Field on the nodes of a [`Grid3D`]. Interior nodes hold unknowns, the other nodes
/// hold Dirichlet data extended along rays. Off-grid evaluation is tricubic
/// Catmull–Rom interpolation.
#[derive(Debug, Clone)]
pub struct ScalarField3D {
    pub grid: Arc<Grid3D>,
    pub values: Vec<f64>,
}

impl ScalarField3D {
    pub fn zeros(grid: Arc<Grid3D>) -> Self {
        let n = grid.num_nodes();
        Self { grid, values: vec![0.0; n] }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<Grid3D>, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.num_nodes()).map(|i| f(grid.point(i))).collect();
        Self { grid, values }
    }

    /// Interior values from `f`, all other nodes from `g` at the radial projection onto
    /// the boundary.
    pub fn from_interior_and_boundary(
        grid: Arc<Grid3D>,
        f: impl Fn(Point) -> f64,
        g: impl Fn(Point) -> f64,
    ) -> Self {
        let values = (0..grid.num_nodes())
            .map(|i| {
                let p = grid.point(i);
                match grid.kind[i] {
                    NodeKind::Interior => f(p),
                    _ => g(grid.domain.project_to_boundary(p)),
                }
            })
            .collect();
        Self { grid, values }
    }

    pub fn value_and_grad(&self, p: Point) -> (f64, Point) {
        let g = &self.grid;
        let n = g.n() as isize;
        let hs = g.spacing;
        let mut base = [0isize; 3];
        let mut w = [[0.0; 4]; 3];
        let mut dw = [[0.0; 4]; 3];
        for a in 0..3 {
            let s = p[a] / hs + g.half as f64;
            let i0 = s.floor().clamp(0.0, (n - 2) as f64);
            let t = s - i0;
            base[a] = i0 as isize - 1;
            let t2 = t * t;
            let t3 = t2 * t;
            w[a] = [
                0.5 * (-t3 + 2.0 * t2 - t),
                0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
                0.5 * (-3.0 * t3 + 4.0 * t2 + t),
                0.5 * (t3 - t2),
            ];
            dw[a] = [
                0.5 * (-3.0 * t2 + 4.0 * t - 1.0) / hs,
                0.5 * (9.0 * t2 - 10.0 * t) / hs,
                0.5 * (-9.0 * t2 + 8.0 * t + 1.0) / hs,
                0.5 * (3.0 * t2 - 2.0 * t) / hs,
            ];
        }
        let clamp = |i: isize| i.clamp(0, n - 1) as usize;
        let mut v = 0.0;
        let mut gr = [0.0; 3];
        for a in 0..4 {
            let i = clamp(base[0] + a as isize);
            for b in 0..4 {
                let j = clamp(base[1] + b as isize);
                for c in 0..4 {
                    let k = clamp(base[2] + c as isize);
                    let f = self.values[g.index(i, j, k)];
                    v += w[0][a] * w[1][b] * w[2][c] * f;
                    gr[0] += dw[0][a] * w[1][b] * w[2][c] * f;
                    gr[1] += w[0][a] * dw[1][b] * w[2][c] * f;
                    gr[2] += w[0][a] * w[1][b] * dw[2][c] * f;
                }
            }
        }
        (v, gr)
    }

    pub fn max_abs_interior(&self) -> f64 {
        self.grid.interior.iter().map(|&i| self.values[i].abs()).fold(0.0, f64::max)
    }
}

impl Field3 for ScalarField3D {
    fn value(&self, p: Point) -> f64 {
        self.value_and_grad(p).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_geometry::Domain;

    #[test]
    fn hermite_reproduces_cubics() {
        let g = RadialGrid::graded(1.0, 20, 1e-4, 5).unwrap();
        let f = ScalarFieldRadial::from_fn(g, |r| r * r * r - r, |r| 3.0 * r * r - 1.0);
        for &r in &[0.013, 0.37, 0.999] {
            assert!((f.value(r) - (r * r * r - r)).abs() < 1e-14);
            assert!((f.deriv(r) - (3.0 * r * r - 1.0)).abs() < 1e-12);
        }
        assert!(f.try_value(1e-6).is_err());
    }

    #[test]
    fn spline_slopes_are_accurate_inside() {
        let g = RadialGrid::graded(1.0, 200, 1e-4, 10).unwrap();
        let vals: Vec<f64> = g.nodes.iter().map(|r| (2.0 * r).sin()).collect();
        let f = ScalarFieldRadial::from_values(g, vals);
        assert!((f.deriv(0.5) - 2.0 * 1.0f64.cos()).abs() < 1e-5);
    }

    #[test]
    fn catmull_rom_reproduces_quadratics() {
        let grid = Arc::new(Grid3D::new(&Domain::unit_ball(), 0.1).unwrap());
        let f = ScalarField3D::from_fn(grid, |p| 1.0 + p[0] - 2.0 * p[1] * p[2] + p[2] * p[2]);
        let p = [0.123, -0.234, 0.345];
        let (v, g) = f.value_and_grad(p);
        assert!((v - (1.0 + p[0] - 2.0 * p[1] * p[2] + p[2] * p[2])).abs() < 1e-12);
        assert!((g[0] - 1.0).abs() < 1e-11);
        assert!((g[1] + 2.0 * p[2]).abs() < 1e-11);
        assert!((g[2] - (-2.0 * p[1] + 2.0 * p[2])).abs() < 1e-11);
    }
}
