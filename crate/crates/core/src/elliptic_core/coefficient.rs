use std::fmt;
use std::sync::Arc;

use crate::vec3::{self, Point};

use super::fields::ScalarFieldRadial;

/// The potential `h` of `Δ + h` (units of 1/length²).
#[derive(Clone)]
pub enum CoefficientH {
    Constant(f64),
    /// `h(x) = Σ cₖ |x|ᵏ`.
    RadialPolynomial(Vec<f64>),
    RadialTable(ScalarFieldRadial),
    Callable3D(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for CoefficientH {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({})", c),
            Self::RadialPolynomial(c) => write!(f, "RadialPolynomial({:?})", c),
            Self::RadialTable(t) => write!(f, "RadialTable({} nodes)", t.grid.len()),
            Self::Callable3D(_) => write!(f, "Callable3D"),
        }
    }
}

impl CoefficientH {
    pub fn zero() -> Self {
        Self::Constant(0.0)
    }

    /// `h(x) = |x|²`.
    pub fn radius_squared() -> Self {
        Self::RadialPolynomial(vec![0.0, 0.0, 1.0])
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, Self::Callable3D(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Constant(c) => *c == 0.0,
            Self::RadialPolynomial(c) => c.iter().all(|&x| x == 0.0),
            _ => false,
        }
    }

    /// Whether the gradient is analytic rather than a finite-difference estimate.
    pub fn has_analytic_gradient(&self) -> bool {
        matches!(self, Self::Constant(_) | Self::RadialPolynomial(_))
    }

    pub fn eval(&self, p: Point) -> f64 {
        match self {
            Self::Callable3D(f) => f(p),
            _ => self.eval_radial(vec3::norm(p)).unwrap(),
        }
    }

    /// `h(r)` for radial kinds.
    pub fn eval_radial(&self, r: f64) -> Option<f64> {
        match self {
            Self::Constant(c) => Some(*c),
            Self::RadialPolynomial(c) => Some(c.iter().rev().fold(0.0, |acc, &a| acc * r + a)),
            Self::RadialTable(t) => Some(t.value(r)),
            Self::Callable3D(_) => None,
        }
    }

    /// `h′(r)` for radial kinds.
    pub fn radial_derivative(&self, r: f64) -> Option<f64> {
        match self {
            Self::Constant(_) => Some(0.0),
            Self::RadialPolynomial(c) => Some(
                c.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, &a)| acc * r + k as f64 * a),
            ),
            Self::RadialTable(t) => Some(t.deriv(r)),
            Self::Callable3D(_) => None,
        }
    }

    /// `∇h(p)`; radial kinds use `h′(r) x/r`, callables use central differences.
    pub fn grad(&self, p: Point) -> Point {
        match self {
            Self::Callable3D(f) => {
                let e = 1e-6;
                let mut g = [0.0; 3];
                for i in 0..3 {
                    let mut a = p;
                    a[i] += e;
                    let mut b = p;
                    b[i] -= e;
                    g[i] = (f(a) - f(b)) / (2.0 * e);
                }
                g
            }
            _ => {
                let r = vec3::norm(p);
                if r == 0.0 {
                    return [0.0; 3];
                }
                vec3::scale(p, self.radial_derivative(r).unwrap() / r)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_value_and_derivative() {
        let h = CoefficientH::RadialPolynomial(vec![1.0, 0.0, -2.0]);
        assert!((h.eval_radial(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((h.radial_derivative(0.5).unwrap() + 2.0).abs() < 1e-15);
        let g = h.grad([0.3, 0.4, 0.0]);
        assert!((g[0] + 4.0 * 0.3).abs() < 1e-14 && (g[1] + 4.0 * 0.4).abs() < 1e-14);
    }

    #[test]
    fn callable_gradient_is_finite_difference() {
        let h = CoefficientH::Callable3D(Arc::new(|p: Point| p[0] * p[0] + 3.0 * p[2]));
        let g = h.grad([0.2, 0.1, -0.3]);
        assert!((g[0] - 0.4).abs() < 1e-8 && g[1].abs() < 1e-8 && (g[2] - 3.0).abs() < 1e-8);
        assert!(!h.is_radial());
    }
}
