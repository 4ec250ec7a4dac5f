//! Minimal point arithmetic for dimensions 1..=3.
//!
//! Points are fixed `[f64; 3]` arrays with the active dimension carried
//! separately; unused coordinates stay at zero. This keeps the walk and
//! quadrature inner loops allocation-free.

pub const MAX_DIM: usize = 3;

/// A point of R^N, N <= 3, padded with zeros.
pub type Point = [f64; MAX_DIM];

pub const ORIGIN: Point = [0.0; MAX_DIM];

pub fn point1(x: f64) -> Point {
    [x, 0.0, 0.0]
}

pub fn point2(x: f64, y: f64) -> Point {
    [x, y, 0.0]
}

pub fn point3(x: f64, y: f64, z: f64) -> Point {
    [x, y, z]
}

pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm2(a: &Point) -> f64 {
    dot(a, a)
}

pub fn norm(a: &Point) -> f64 {
    norm2(a).sqrt()
}

pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// a + t * b
pub fn axpy(a: &Point, t: f64, b: &Point) -> Point {
    [a[0] + t * b[0], a[1] + t * b[1], a[2] + t * b[2]]
}

pub fn scale(a: &Point, t: f64) -> Point {
    [a[0] * t, a[1] * t, a[2] * t]
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

/// Surface measure of the unit sphere S^{n-1} in R^n.
pub fn sphere_area(n: usize) -> f64 {
    debug_assert!(n >= 1);
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / crate::special::gamma(n as f64 / 2.0)
}

/// Volume of the unit ball in R^n.
pub fn ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}
