//! Minimal helpers for points and vectors of `R³`.

/// A point or vector of `R³`.
pub type Point = [f64; 3];

pub const ORIGIN: Point = [0.0; 3];

pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a + s·b`.
pub fn axpy(a: Point, s: f64, b: Point) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm2(a: Point) -> f64 {
    dot(a, a)
}

pub fn norm(a: Point) -> f64 {
    norm2(a).sqrt()
}

pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Unit vector along `a`; the zero vector maps to the zero vector.
pub fn normalize(a: Point) -> Point {
    let n = norm(a);
    if n == 0.0 {
        a
    } else {
        scale(a, 1.0 / n)
    }
}

pub fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Two unit vectors completing `n` (unit) to an orthonormal frame.
pub fn tangent_frame(n: Point) -> (Point, Point) {
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let t1 = normalize(cross(n, helper));
    let t2 = cross(n, t1);
    (t1, t2)
}
