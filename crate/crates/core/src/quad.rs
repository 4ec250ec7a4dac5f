//! One-dimensional panel quadrature and product rules on spheres.
//!
//! The building blocks here are deliberately simple: Gauss-Legendre panels,
//! geometric grading towards endpoint singularities, and a power-law
//! substitution that removes algebraic singularities of known exponent.
//! Everything is deterministic; summation order is fixed.

use crate::geom::{point1, point2, point3, Point};

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Nodes/weights by Newton iteration on the Legendre polynomial.
    pub fn legendre(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_deriv(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Integrate f on [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c + h * x);
        }
        acc * h
    }
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrate f over consecutive panels given by `breaks`.
pub fn integrate_panels<F: FnMut(f64) -> f64>(rule: &GaussRule, breaks: &[f64], mut f: F) -> f64 {
    let mut acc = 0.0;
    for w in breaks.windows(2) {
        acc += rule.integrate(w[0], w[1], &mut f);
    }
    acc
}

/// Panel breakpoints on [a, b], geometrically refined towards `a`.
///
/// The first panel boundary sits at distance (b-a) * ratio^levels from a;
/// anything closer to `a` than that is left to the caller (either covered by
/// a substitution or bounded analytically).
pub fn graded_towards_start(a: f64, b: f64, levels: usize, ratio: f64) -> Vec<f64> {
    assert!(b > a && ratio > 0.0 && ratio < 1.0);
    let len = b - a;
    let mut breaks = Vec::with_capacity(levels + 2);
    breaks.push(a + len * ratio.powi(levels as i32));
    for k in (0..levels).rev() {
        breaks.push(a + len * ratio.powi(k as i32));
    }
    breaks
}

/// Same, refined towards `b`.
pub fn graded_towards_end(a: f64, b: f64, levels: usize, ratio: f64) -> Vec<f64> {
    let rev = graded_towards_start(0.0, b - a, levels, ratio);
    let mut breaks: Vec<f64> = rev.iter().rev().map(|t| b - t).collect();
    breaks.insert(0, a);
    breaks.push(b);
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-300);
    breaks
}

/// Integral of f over (a, b] where f ~ C (x-a)^{-alpha} near a, 0 <= alpha < 1.
///
/// Substitutes x = a + u^{1/(1-alpha)} so the transformed integrand is bounded
/// at u = 0, then applies graded panels to absorb the remaining fractional
/// smoothness. The integrand receives both x and the exact distance d = x - a,
/// so singular factors can be evaluated without cancellation.
pub fn integrate_algebraic_start<F: FnMut(f64, f64) -> f64>(
    rule: &GaussRule,
    a: f64,
    b: f64,
    alpha: f64,
    levels: usize,
    mut f: F,
) -> f64 {
    assert!(alpha < 1.0, "non-integrable endpoint singularity");
    let alpha = alpha.max(0.0);
    let p = 1.0 / (1.0 - alpha);
    let u_max = (b - a).powf(1.0 - alpha);
    let mut breaks = graded_towards_start(0.0, u_max, levels, 0.5);
    breaks.insert(0, 0.0);
    integrate_panels(rule, &breaks, |u| {
        if u <= 0.0 {
            return 0.0;
        }
        let d = u.powf(p);
        f(a + d, d) * p * u.powf(p - 1.0)
    })
}

/// Integral of f over [a, b) with an algebraic singularity of order alpha at
/// b. The integrand receives x and the exact distance d = b - x.
pub fn integrate_algebraic_end<F: FnMut(f64, f64) -> f64>(
    rule: &GaussRule,
    a: f64,
    b: f64,
    alpha: f64,
    levels: usize,
    mut f: F,
) -> f64 {
    integrate_algebraic_start(rule, 0.0, b - a, alpha, levels, |_, d| f(b - d, d))
}

/// Like [`integrate_algebraic_start`] but stops at distance `min_dist` from
/// the singular endpoint and closes the gap with the local power model
/// C d^{-alpha}, C estimated from the integrand at the cut. Black-box fields
/// lose all accuracy closer to their singularity than f64 cancellation
/// allows; the clamp keeps evaluations in the trustworthy range.
pub fn integrate_algebraic_start_clamped<F: FnMut(f64, f64) -> f64>(
    rule: &GaussRule,
    a: f64,
    b: f64,
    alpha: f64,
    min_dist: f64,
    mut f: F,
) -> f64 {
    assert!(alpha < 1.0, "non-integrable endpoint singularity");
    let alpha = alpha.max(0.0);
    let len = b - a;
    if len <= 0.0 {
        return 0.0;
    }
    let min_dist = min_dist.min(len * 0.5).max(len * 1e-14);
    let p = 1.0 / (1.0 - alpha);
    let u_min = min_dist.powf(1.0 - alpha);
    let u_max = len.powf(1.0 - alpha);
    let levels = ((u_max / u_min).log2().ceil() as usize).max(1);
    let breaks = graded_towards_start(0.0, u_max, levels, 0.5);
    let value = integrate_panels(rule, &breaks, |u| {
        let d = u.powf(p);
        f(a + d, d) * p * u.powf(p - 1.0)
    });
    // sliver [a, a + d0]: integrand ~ C d^{-alpha} with C = f(a+d0) d0^alpha
    let d0 = breaks[0].powf(p);
    let sliver = f(a + d0, d0) * d0 / (1.0 - alpha);
    value + sliver
}

/// Mirror of [`integrate_algebraic_start_clamped`] at the right endpoint.
pub fn integrate_algebraic_end_clamped<F: FnMut(f64, f64) -> f64>(
    rule: &GaussRule,
    a: f64,
    b: f64,
    alpha: f64,
    min_dist: f64,
    mut f: F,
) -> f64 {
    integrate_algebraic_start_clamped(rule, 0.0, b - a, alpha, min_dist, |_, d| f(b - d, d))
}

/// Improper integral over [a, +inf) of a function decaying like x^{-q}, q > 1.
///
/// Geometric panels [a 2^k, a 2^{k+1}] are summed until the analytic tail
/// bound of the power model drops below `tail_tol`; returns the value and the
/// final tail bound (to be folded into an error estimate by callers).
pub fn integrate_power_tail<F: FnMut(f64) -> f64>(
    rule: &GaussRule,
    a: f64,
    q: f64,
    tail_tol: f64,
    max_doublings: usize,
    mut f: F,
) -> (f64, f64) {
    assert!(a > 0.0 && q > 1.0);
    let mut acc = 0.0;
    let mut lo = a;
    let mut tail = f64::INFINITY;
    for _ in 0..max_doublings {
        let hi = lo * 2.0;
        acc += rule.integrate(lo, hi, &mut f);
        // local amplitude at hi estimates the model constant C in C x^{-q}
        let c_est = f(hi).abs() * hi.powf(q);
        tail = c_est * hi.powf(1.0 - q) / (q - 1.0);
        lo = hi;
        if tail < tail_tol {
            break;
        }
    }
    (acc, tail)
}

/// Quadrature rule on the unit sphere S^{n-1}: directions and weights summing
/// to the sphere area. n = 1 is the two-point set {-1, +1}.
pub fn sphere_rule(n: usize, resolution: usize) -> Vec<(Point, f64)> {
    match n {
        1 => vec![(point1(1.0), 1.0), (point1(-1.0), 1.0)],
        2 => {
            let m = resolution.max(4);
            let w = 2.0 * std::f64::consts::PI / m as f64;
            (0..m)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / m as f64;
                    (point2(th.cos(), th.sin()), w)
                })
                .collect()
        }
        3 => {
            // Gauss in cos(theta) x uniform in phi
            let n_mu = resolution.max(4);
            let n_phi = 2 * n_mu;
            let gauss = GaussRule::legendre(n_mu);
            let wphi = 2.0 * std::f64::consts::PI / n_phi as f64;
            let mut out = Vec::with_capacity(n_mu * n_phi);
            for (mu, wmu) in gauss.nodes.iter().zip(&gauss.weights) {
                let sin_t = (1.0 - mu * mu).sqrt();
                for k in 0..n_phi {
                    let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n_phi as f64;
                    out.push((point3(sin_t * phi.cos(), sin_t * phi.sin(), *mu), wmu * wphi));
                }
            }
            out
        }
        _ => panic!("sphere_rule supports n in 1..=3, got {n}"),
    }
}
