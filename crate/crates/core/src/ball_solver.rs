//! Deterministic quadrature solvers on the unit ball: the Poisson integral
//! against exterior data, the constant-free Martin machinery and its weighted
//! boundary trace, and the monotone construction of large s-harmonic
//! functions by datum truncation.
//!
//! Exterior radial integrals put their nodes where the kernels live: an
//! algebraic-endpoint substitution absorbs the (|y|^2-1)^{-s} factor at the
//! sphere and geometric panels with a frozen-datum completion handle the far
//! tail. Near-boundary evaluation points additionally get angular panels
//! graded towards the closest boundary direction.

use crate::error::{Error, Result};
use crate::geom::{norm, norm2, point2, sphere_area, Point};
use crate::kernels::{constant_exit, KernelParams};
use crate::pv_eval::{GrowthClass, QuadConfig, ScalarField};
use crate::quad::{graded_towards_start, sphere_rule, GaussRule};

/// Angular quadrature on S^{N-1}; for N = 2 it can grade panels towards a
/// distinguished direction where a kernel concentrates.
fn angular_rule(n: usize, toward: Option<f64>, concentration: f64, base: usize) -> Vec<(Point, f64)> {
    match (n, toward) {
        (2, Some(phi0)) if concentration < 0.5 => {
            let levels = (((std::f64::consts::PI / (0.05 * concentration)).log2().ceil()) as usize)
                .clamp(8, 46);
            let gauss = GaussRule::legendre(8);
            let mut out = Vec::new();
            let mut breaks = graded_towards_start(0.0, std::f64::consts::PI, levels, 0.5);
            breaks.insert(0, 0.0);
            for sign in [-1.0, 1.0] {
                for w in breaks.windows(2) {
                    let c = 0.5 * (w[0] + w[1]);
                    let h = 0.5 * (w[1] - w[0]);
                    for (nd, wt) in gauss.nodes.iter().zip(&gauss.weights) {
                        let phi = phi0 + sign * (c + h * nd);
                        out.push((point2(phi.cos(), phi.sin()), wt * h));
                    }
                }
            }
            out
        }
        _ => sphere_rule(n, base),
    }
}

/// u(x) = int_{|y|>1} P_B(x,y) g(y) dy for |x| < 1.
pub fn poisson_solve_ball(
    params: KernelParams,
    g: &ScalarField,
    x: &Point,
    q: &QuadConfig,
) -> Result<f64> {
    KernelParams::new(params.n, params.s)?;
    let nx2 = norm2(x);
    if nx2 >= 1.0 {
        return Err(Error::domain("x", "evaluation point must lie inside the unit ball"));
    }
    let s = params.s;
    let nf = params.nf();
    let cexit = constant_exit(params);
    let pref = cexit * (1.0 - nx2).powf(s);
    let delta = 1.0 - nx2.sqrt();

    let toward = if params.n == 2 { Some(x[1].atan2(x[0])) } else { None };
    let dirs = angular_rule(params.n, toward, delta, 96);
    let gauss = GaussRule::legendre(12);
    let far_radius = q.far_radius.max(16.0);

    let mut total = 0.0;
    let mut diverged = false;
    for (theta, w) in &dirs {
        // kernel along the ray rho theta, with the sphere distance d = rho - 1
        // kept exact; breakpoints at g's own singular spheres (origin-centered,
        // so they cross radially at their radii)
        let kernel = |rho: f64, d: f64| {
            let y = crate::geom::scale(theta, rho);
            let dist2 = crate::geom::norm2(&crate::geom::sub(x, &y));
            pref * rho.powf(nf - 1.0) / (dist2.powf(nf / 2.0) * (d * (rho + 1.0)).powf(s))
        };
        // near part (1, 2]: algebraic singularity at the sphere
        let mut crossings: Vec<(f64, f64)> = g
            .singular_spheres
            .iter()
            .filter(|sp| sp.radius > 1.0 + 1e-12 && sp.radius < 2.0)
            .map(|sp| (sp.radius, sp.exponent))
            .collect();
        crossings.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut near = 0.0;
        let mut lo = 1.0;
        for &(rc, expo) in crossings.iter().chain(std::iter::once(&(2.0, 0.0))) {
            if rc <= lo {
                continue;
            }
            let alpha_left = if lo == 1.0 { s } else { expo_left(&crossings, lo) };
            let mid = 0.5 * (lo + rc);
            near += crate::quad::integrate_algebraic_start_clamped(
                &gauss,
                lo,
                mid,
                alpha_left,
                (mid - lo) * 1e-9,
                |rho, d| {
                    let dd = if lo == 1.0 { d } else { rho - 1.0 };
                    kernel(rho, dd) * g.eval(&crate::geom::scale(theta, rho))
                },
            );
            near += crate::quad::integrate_algebraic_end_clamped(
                &gauss,
                mid,
                rc,
                expo.max(0.0),
                (rc - mid) * 1e-9,
                |rho, _| kernel(rho, rho - 1.0) * g.eval(&crate::geom::scale(theta, rho)),
            );
            lo = rc;
        }
        // far part [2, R] with geometric panels, then frozen-datum completion
        let mut far = 0.0;
        let mut a = 2.0f64;
        let r_max = match g.growth {
            GrowthClass::CompactlySupported { radius } => radius.min(far_radius),
            _ => far_radius,
        };
        let mut first_panel = None;
        let mut last_panel = 0.0f64;
        while a < r_max {
            let b = (a * 2.0).min(r_max);
            let panel = gauss.integrate(a, b, |rho| {
                kernel(rho, rho - 1.0) * g.eval(&crate::geom::scale(theta, rho))
            });
            if first_panel.is_none() {
                first_panel = Some(panel.abs());
            }
            last_panel = panel.abs();
            far += panel;
            a = b;
        }
        // non-Cauchy dyadic shells: the outermost shell dominates the first
        if last_panel > first_panel.unwrap_or(0.0).max(1e-12) {
            diverged = true;
        }
        if !matches!(g.growth, GrowthClass::CompactlySupported { .. }) {
            // integrand ~ K rho^{-1-2s} g: freeze g at the truncation radius
            let end = kernel(r_max, r_max - 1.0) * g.eval(&crate::geom::scale(theta, r_max));
            far += end * r_max / (2.0 * s);
        }
        total += w * (near + far);
    }
    if diverged || !total.is_finite() {
        return Err(Error::convergence_with(
            "exterior datum integral shows non-Cauchy shell sums",
            total,
            f64::INFINITY,
        ));
    }
    Ok(total)
}

fn expo_left(crossings: &[(f64, f64)], at: f64) -> f64 {
    crossings
        .iter()
        .find(|(r, _)| (*r - at).abs() < 1e-12)
        .map(|(_, e)| e.max(0.0))
        .unwrap_or(0.0)
}

/// Constant-free Martin average: int M(x,theta) h(theta) dH / int M(x,theta) dH.
#[derive(Debug, Clone, Copy)]
pub struct MartinTrace {
    pub u_ratio: f64,
}

pub fn martin_trace_ball<H>(params: KernelParams, h: H, x: &Point) -> Result<MartinTrace>
where
    H: Fn(&Point) -> f64,
{
    let (num, den) = martin_integrals(params, &h, x)?;
    Ok(MartinTrace { u_ratio: num / den })
}

/// int_{S^{N-1}} M(x,theta) h(theta) dH and the same with h = 1.
fn martin_integrals<H>(params: KernelParams, h: &H, x: &Point) -> Result<(f64, f64)>
where
    H: Fn(&Point) -> f64,
{
    let nx2 = norm2(x);
    if nx2 >= 1.0 {
        return Err(Error::domain("x", "evaluation point must lie inside the unit ball"));
    }
    let delta = 1.0 - nx2.sqrt();
    let toward = if params.n == 2 { Some(x[1].atan2(x[0])) } else { None };
    let dirs = angular_rule(params.n, toward, delta, 128);
    let pref = (1.0 - nx2).powf(params.s);
    let nf = params.nf();
    let mut num = 0.0;
    let mut den = 0.0;
    for (theta, w) in &dirs {
        let m = pref / crate::geom::dist(x, theta).powf(nf);
        num += w * m * h(theta);
        den += w * m;
    }
    Ok((num, den))
}

/// Martin normalizer int_{S^{N-1}} M(x,theta) dH, the natural s-harmonic
/// blow-up profile the weighted trace divides by.
pub fn martin_normalizer(params: KernelParams, x: &Point) -> Result<f64> {
    martin_integrals(params, &|_: &Point| 1.0, x).map(|(_, den)| den)
}

/// Monotone family u_n(x) solving the ball problem with datum min(g, n).
pub fn large_sharmonic_ball(
    params: KernelParams,
    g: &ScalarField,
    truncations: &[f64],
    x: &Point,
    q: &QuadConfig,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(truncations.len());
    for &level in truncations {
        if level <= 0.0 {
            return Err(Error::domain("truncations", "levels must be positive"));
        }
        let capped = cap_field(g, level);
        out.push(poisson_solve_ball(params, &capped, x, q)?);
    }
    Ok(out)
}

fn cap_field(g: &ScalarField, level: f64) -> ScalarField {
    let inner = g.clone();
    let mut capped = ScalarField::new(
        move |y: &Point| inner.eval(y).min(level),
        g.c2_radius,
        g.growth,
    );
    // the pole is gone after capping; keep the markers as kinks
    capped.singular_spheres = g
        .singular_spheres
        .iter()
        .map(|sp| crate::pv_eval::SingularSphere { radius: sp.radius, exponent: 0.0 })
        .collect();
    capped
}

/// Weighted boundary trace from samples of u along an inward normal.
#[derive(Debug, Clone, Copy)]
pub struct WeightedTrace {
    pub eu: f64,
    pub converged: bool,
}

/// Samples are (delta, u((1-delta) theta*)) at geometrically decreasing delta;
/// the ratio u / int M dH is Richardson-extrapolated at first order.
pub fn weighted_trace(
    params: KernelParams,
    samples: &[(f64, f64)],
    rel_tol: f64,
) -> Result<WeightedTrace> {
    if samples.len() < 3 {
        return Err(Error::domain("samples", "need at least three samples"));
    }
    let mut ratios = Vec::with_capacity(samples.len());
    for &(delta, u) in samples {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::domain("samples", "deltas must lie in (0,1)"));
        }
        let x = point2(1.0 - delta, 0.0);
        let x = if params.n == 1 {
            crate::geom::point1(1.0 - delta)
        } else {
            x
        };
        let l = martin_normalizer(params, &x)?;
        ratios.push(u / l);
    }
    let mut extrapolated = Vec::new();
    for i in 1..ratios.len() {
        let qr = samples[i].0 / samples[i - 1].0;
        if !(qr > 0.0 && qr < 1.0) {
            return Err(Error::domain("samples", "deltas must decrease geometrically"));
        }
        extrapolated.push((ratios[i] - qr * ratios[i - 1]) / (1.0 - qr));
    }
    let last = *extrapolated.last().unwrap();
    let prev = extrapolated[extrapolated.len() - 2];
    let scale = last.abs().max(ratios.last().unwrap().abs()).max(1e-30);
    let converged = (last - prev).abs() <= rel_tol * scale;
    Ok(WeightedTrace { eu: last, converged })
}
