//! Second-order jets carrying a value, its gradient and its analyst Laplacian.
//!
//! A [`Jet`] is closed under the arithmetic and elementary functions used to build the
//! blow-up families, so the Laplacian of any composition is exact up to rounding:
//!
//! - products: `Δ(ab) = aΔb + bΔa − 2∇a·∇b`
//! - compositions: `Δf(a) = f′(a)Δa − f″(a)|∇a|²`
//!
//! with `Δ = −Σ∂²` throughout.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::vec3::{self, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: Point,
    /// Analyst Laplacian `−Σ∂²`.
    pub lap: f64,
}

impl Jet {
    pub fn new(v: f64, g: Point, lap: f64) -> Self {
        Self { v, g, lap }
    }

    pub fn constant(c: f64) -> Self {
        Self { v: c, g: [0.0; 3], lap: 0.0 }
    }

    /// The coordinate function `x ↦ xᵢ` evaluated at `p`.
    pub fn coordinate(p: Point, i: usize) -> Self {
        let mut g = [0.0; 3];
        g[i] = 1.0;
        Self { v: p[i], g, lap: 0.0 }
    }

    /// The affine function `x ↦ ⟨a, x − c⟩` evaluated at `p`.
    pub fn linear(p: Point, c: Point, a: Point) -> Self {
        Self { v: vec3::dot(a, vec3::sub(p, c)), g: a, lap: 0.0 }
    }

    /// `x ↦ |x − c|²` at `p`.
    pub fn dist2(p: Point, c: Point) -> Self {
        let d = vec3::sub(p, c);
        Self { v: vec3::norm2(d), g: vec3::scale(d, 2.0), lap: -6.0 }
    }

    /// `x ↦ |x − c|` at `p ≠ c`.
    pub fn dist(p: Point, c: Point) -> Self {
        let d = vec3::sub(p, c);
        let r = vec3::norm(d);
        Self { v: r, g: vec3::scale(d, 1.0 / r), lap: -2.0 / r }
    }

    /// `|∇a|²`.
    pub fn grad_norm2(&self) -> f64 {
        vec3::norm2(self.g)
    }

    /// Applies `f` given `f(v)`, `f′(v)` and `f″(v)`.
    pub fn compose(self, f0: f64, f1: f64, f2: f64) -> Self {
        Self {
            v: f0,
            g: vec3::scale(self.g, f1),
            lap: f1 * self.lap - f2 * self.grad_norm2(),
        }
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.compose(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powf(self, a: f64) -> Self {
        let v = self.v;
        let p2 = v.powf(a - 2.0);
        self.compose(p2 * v * v, a * p2 * v, a * (a - 1.0) * p2)
    }

    pub fn powi(self, n: i32) -> Self {
        let v = self.v;
        match n {
            0 => Self::constant(1.0),
            1 => self,
            _ => {
                let p2 = v.powi(n - 2);
                let nf = n as f64;
                self.compose(p2 * v * v, nf * p2 * v, nf * (nf - 1.0) * p2)
            }
        }
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.compose(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn ln(self) -> Self {
        let v = self.v;
        self.compose(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    /// `ln(1 + a)`, accurate for small `a`.
    pub fn ln_1p(self) -> Self {
        let d = 1.0 / (1.0 + self.v);
        self.compose(self.v.ln_1p(), d, -d * d)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    pub fn atan(self) -> Self {
        let v = self.v;
        let d = 1.0 / (1.0 + v * v);
        self.compose(v.atan(), d, -2.0 * v * d * d)
    }

    pub fn scale(self, s: f64) -> Self {
        Self { v: self.v * s, g: vec3::scale(self.g, s), lap: self.lap * s }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, g: vec3::add(self.g, o.g), lap: self.lap + o.lap }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet { v: self.v - o.v, g: vec3::sub(self.g, o.g), lap: self.lap - o.lap }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            g: vec3::add(vec3::scale(o.g, self.v), vec3::scale(self.g, o.v)),
            lap: self.v * o.lap + o.v * self.lap - 2.0 * vec3::dot(self.g, o.g),
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        Jet { v: self.v + c, ..self }
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        Jet { v: self.v - c, ..self }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        self.scale(1.0 / c)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, j: Jet) -> Jet {
        j + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, j: Jet) -> Jet {
        -j + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, j: Jet) -> Jet {
        j.recip().scale(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_lap(f: impl Fn(Point) -> f64, p: Point, h: f64) -> f64 {
        let mut s = -6.0 * f(p);
        for i in 0..3 {
            let mut a = p;
            a[i] += h;
            let mut b = p;
            b[i] -= h;
            s += f(a) + f(b);
        }
        -s / (h * h)
    }

    #[test]
    fn dist2_has_analyst_laplacian_minus_six() {
        let j = Jet::dist2([0.3, -0.2, 0.5], [0.0; 3]);
        assert_eq!(j.lap, -6.0);
    }

    #[test]
    fn inverse_distance_is_harmonic() {
        let j = Jet::dist([0.3, -0.2, 0.5], [0.1, 0.0, 0.0]).recip();
        assert!(j.lap.abs() < 1e-12);
    }

    #[test]
    fn composite_matches_finite_differences() {
        let p = [0.31, -0.17, 0.42];
        let f = |q: Point| {
            let r2 = Jet::dist2(q, [0.05, 0.0, -0.1]);
            let x = Jet::coordinate(q, 0);
            ((r2 + 1.0).powf(-0.5) * x.atan() + (x * x + 2.0).ln() / (r2 + 0.3).sqrt()).exp()
        };
        let j = f(p);
        let fd = fd_lap(|q| f(q).v, p, 1e-3);
        assert!((j.lap - fd).abs() < 1e-5 * (1.0 + fd.abs()), "{} vs {}", j.lap, fd);
        for i in 0..3 {
            let mut a = p;
            a[i] += 1e-6;
            let mut b = p;
            b[i] -= 1e-6;
            let d = (f(a).v - f(b).v) / 2e-6;
            assert!((j.g[i] - d).abs() < 1e-7);
        }
    }

    #[test]
    fn powi_agrees_with_repeated_product() {
        let p = [0.2, 0.4, -0.3];
        let a = Jet::dist2(p, [0.0; 3]) + 0.7;
        let b = a * a * a * a * a;
        let c = a.powi(5);
        assert!((b.v - c.v).abs() < 1e-14);
        assert!((b.lap - c.lap).abs() < 1e-12);
    }
}
