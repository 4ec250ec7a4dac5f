//! Closed-form constants, kernels and reference solutions on the unit ball
//! for the restricted fractional Laplacian.
//!
//! These are the exact objects the Monte Carlo and quadrature solvers are
//! validated against: the renormalizing constants, the exit kernel of the
//! 2s-stable process leaving a ball, the ball Poisson and Martin kernels,
//! the explicit torsion function and the one-parameter family of s-harmonic
//! functions with an algebraic pole at the sphere.

use crate::error::{Error, Result};
use crate::geom::{dist, norm, norm2, Point};
use crate::special::{beta_inc, gamma, ln_gamma};

/// Dimension and fractional order, the pair every kernel formula depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub n: usize,
    pub s: f64,
}

impl KernelParams {
    /// Validated constructor: N >= 1 and s strictly inside (0, 1).
    /// The endpoints s = 0 and s = 1 are rejected, not extrapolated.
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("N", format!("dimension must be >= 1, got {n}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::domain("s", format!("fractional order must lie in (0,1), got {s}")));
        }
        Ok(KernelParams { n, s })
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }
}

/// A ball B_r(x0).
#[derive(Debug, Clone, Copy)]
pub struct BallGeometry {
    pub center: Point,
    pub radius: f64,
}

impl BallGeometry {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::domain("radius", format!("radius must be positive, got {radius}")));
        }
        Ok(BallGeometry { center, radius })
    }

    pub fn unit() -> Self {
        BallGeometry { center: crate::geom::ORIGIN, radius: 1.0 }
    }
}

/// The three renormalizing constants attached to (N, s, r).
#[derive(Debug, Clone, Copy)]
pub struct NormalizingConstants {
    /// Constant in front of the principal-value integral.
    pub c_big: f64,
    /// Normalizer of the exit kernel.
    pub c_small: f64,
    /// Mean-value weight of the source term on a ball of radius r.
    pub gamma: f64,
}

/// C(N,s) = 4^s Gamma(N/2+s) s / (pi^{N/2} Gamma(1-s)).
pub fn constant_pv(params: KernelParams) -> f64 {
    let nf = params.nf();
    let s = params.s;
    (4.0_f64.powf(s) * gamma(nf / 2.0 + s) * s) / (std::f64::consts::PI.powf(nf / 2.0) * gamma(1.0 - s))
}

/// c(N,s) = Gamma(N/2) sin(pi s) / pi^{1+N/2}.
pub fn constant_exit(params: KernelParams) -> f64 {
    let nf = params.nf();
    let s = params.s;
    gamma(nf / 2.0) * (std::f64::consts::PI * s).sin() / std::f64::consts::PI.powf(1.0 + nf / 2.0)
}

/// gamma(N,s,r) = Gamma(N/2) r^{2s} / (2^{2s} Gamma((N+2s)/2) Gamma(1+s)).
pub fn constant_mean_value(params: KernelParams, r: f64) -> f64 {
    let nf = params.nf();
    let s = params.s;
    let ln = ln_gamma(nf / 2.0) - 2.0 * s * 2.0_f64.ln() - ln_gamma((nf + 2.0 * s) / 2.0)
        - ln_gamma(1.0 + s)
        + 2.0 * s * r.ln();
    ln.exp()
}

/// All three constants at once, with validation.
pub fn normalizing_constants(params: KernelParams, r: f64) -> Result<NormalizingConstants> {
    KernelParams::new(params.n, params.s)?;
    if r <= 0.0 {
        return Err(Error::domain("r", format!("radius must be positive, got {r}")));
    }
    Ok(NormalizingConstants {
        c_big: constant_pv(params),
        c_small: constant_exit(params),
        gamma: constant_mean_value(params, r),
    })
}

/// Density at y of the exit position of the 2s-stable process leaving the
/// ball: c(N,s) r^{2s} / (|y-x0|^N (|y-x0|^2 - r^2)^s) outside the closed
/// ball, zero inside it.
pub fn exit_kernel_density(params: KernelParams, ball: &BallGeometry, y: &Point) -> f64 {
    let d2 = norm2(&crate::geom::sub(y, &ball.center));
    let r2 = ball.radius * ball.radius;
    if d2 <= r2 {
        return 0.0;
    }
    let nf = params.nf();
    constant_exit(params) * ball.radius.powf(2.0 * params.s)
        / (d2.powf(nf / 2.0) * (d2 - r2).powf(params.s))
}

/// Radial CDF of the exit law of the unit ball at scaled radius rho >= 1:
/// the mass of {|y - x0| <= rho r}, equal to I_{1 - rho^{-2}}(1-s, s).
pub fn exit_kernel_radial_cdf(params: KernelParams, rho: f64) -> Result<f64> {
    if rho < 1.0 {
        return Ok(0.0);
    }
    beta_inc(1.0 - params.s, params.s, 1.0 - rho.powi(-2))
}

/// Poisson kernel of the unit ball: c(N,s)/|x-y|^N ((1-|x|^2)/(|y|^2-1))^s
/// for |x| < 1 < |y|.
pub fn ball_poisson_kernel(params: KernelParams, x: &Point, y: &Point) -> Result<f64> {
    let nx2 = norm2(x);
    let ny2 = norm2(y);
    if nx2 >= 1.0 {
        return Err(Error::domain("x", format!("|x| must be < 1, got {}", nx2.sqrt())));
    }
    if ny2 <= 1.0 {
        return Err(Error::domain("y", format!("|y| must be > 1, got {}", ny2.sqrt())));
    }
    let nf = params.nf();
    Ok(constant_exit(params) / dist(x, y).powf(nf)
        * ((1.0 - nx2) / (ny2 - 1.0)).powf(params.s))
}

/// Martin kernel of the unit ball, WITHOUT its multiplicative constant:
/// (1-|x|^2)^s / |x-theta|^N for |x| < 1, |theta| = 1.
///
/// Only normalized ratios of this quantity are meaningful downstream.
pub fn ball_martin_kernel(params: KernelParams, x: &Point, theta: &Point) -> Result<f64> {
    let nx2 = norm2(x);
    if nx2 >= 1.0 {
        return Err(Error::domain("x", format!("|x| must be < 1, got {}", nx2.sqrt())));
    }
    if (norm(theta) - 1.0).abs() > 1e-12 {
        return Err(Error::domain("theta", "theta must be a unit vector"));
    }
    let d = dist(x, theta);
    if d == 0.0 {
        return Err(Error::domain("x", "x = theta is a pole of the Martin kernel"));
    }
    Ok((1.0 - nx2).powf(params.s) / d.powf(params.nf()))
}

/// Explicit torsion function of the ball B_r(x0):
/// Gamma(N/2)/(2^{2s} Gamma((N+2s)/2) Gamma(1+s)) (r^2-|x-x0|^2)_+^s.
pub fn torsion_ball(params: KernelParams, ball: &BallGeometry, x: &Point) -> f64 {
    let d2 = norm2(&crate::geom::sub(x, &ball.center));
    let r2 = ball.radius * ball.radius;
    if d2 >= r2 {
        return 0.0;
    }
    // written as gamma(N,s,r) (1 - d^2/r^2)^s so the value at the center is
    // the mean-value constant bit-for-bit
    constant_mean_value(params, ball.radius) * (1.0 - d2 / r2).powf(params.s)
}

/// The s-harmonic family u_sigma on the unit ball, 0 < sigma <= 1-s:
/// c(N,s)(1-|x|^2)^{-sigma} inside, c(N,s+sigma)(|x|^2-1)^{-sigma} outside
/// (identically zero outside when sigma = 1-s).
pub fn explicit_sharmonic(params: KernelParams, sigma: f64, x: &Point) -> Result<f64> {
    if !(sigma > 0.0 && sigma <= 1.0 - params.s) {
        return Err(Error::domain(
            "sigma",
            format!("sigma must lie in (0, 1-s] = (0, {}], got {sigma}", 1.0 - params.s),
        ));
    }
    let nx2 = norm2(x);
    if (nx2 - 1.0).abs() < 1e-300 {
        return Err(Error::domain("x", "|x| = 1 is a pole of u_sigma"));
    }
    if nx2 < 1.0 {
        Ok(constant_exit(params) * (1.0 - nx2).powf(-sigma))
    } else if sigma < 1.0 - params.s {
        let shifted = KernelParams { n: params.n, s: params.s + sigma };
        Ok(constant_exit(shifted) * (nx2 - 1.0).powf(-sigma))
    } else {
        Ok(0.0)
    }
}
