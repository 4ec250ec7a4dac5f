//! The spectral fractional Laplacian on separable domains (interval,
//! rectangle) via Dirichlet eigen-expansion and heat-kernel subordination:
//! Green and Poisson kernels, the jumping kernel and killing measure, the
//! natural boundary weight h1, and large solutions for power nonlinearities.
//!
//! Two independent evaluation routes coexist deliberately: eigen-sums
//! (accelerated by repeated summation by parts where they converge only
//! conditionally) and Bochner subordination of the heat kernel, whose small
//! times are computed with the method-of-images Gaussian series.

use crate::error::{Error, Result};
use crate::kernels::KernelParams;
use crate::quad::GaussRule;
use crate::special::{erf, gamma, gamma_q, gamma_upper};

const PI: f64 = std::f64::consts::PI;

/// Separable domains with closed-form Dirichlet eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeparableDomain {
    /// (0, 1)
    Interval,
    /// (0, width) x (0, height)
    Rectangle { width: f64, height: f64 },
}

/// Truncated Dirichlet eigenbasis of the domain.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub domain: SeparableDomain,
    /// modes kept, sorted by increasing eigenvalue
    modes: Vec<Mode>,
}

#[derive(Debug, Clone, Copy)]
struct Mode {
    lambda: f64,
    jx: usize,
    jy: usize, // zero for the interval
}

impl EigenBasis {
    pub fn interval(j_max: usize) -> Result<Self> {
        if j_max == 0 {
            return Err(Error::domain("J", "need at least one mode"));
        }
        let modes = (1..=j_max)
            .map(|j| Mode {
                lambda: (j as f64 * PI).powi(2),
                jx: j,
                jy: 0,
            })
            .collect();
        Ok(EigenBasis {
            domain: SeparableDomain::Interval,
            modes,
        })
    }

    pub fn rectangle(width: f64, height: f64, count: usize) -> Result<Self> {
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::domain("domain", "rectangle sides must be positive"));
        }
        if count == 0 {
            return Err(Error::domain("J", "need at least one mode"));
        }
        let per_axis = (count as f64).sqrt() as usize + 2;
        let mut modes = Vec::new();
        for jx in 1..=(per_axis * 2) {
            for jy in 1..=(per_axis * 2) {
                modes.push(Mode {
                    lambda: PI * PI
                        * ((jx as f64 / width).powi(2) + (jy as f64 / height).powi(2)),
                    jx,
                    jy,
                });
            }
        }
        modes.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
        modes.truncate(count);
        Ok(EigenBasis {
            domain: SeparableDomain::Rectangle { width, height },
            modes,
        })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.modes[k].lambda
    }

    /// L2-normalized eigenfunction k at a point (interval uses x[0]).
    pub fn eigenfunction(&self, k: usize, x: &[f64]) -> f64 {
        let m = self.modes[k];
        match self.domain {
            SeparableDomain::Interval => 2.0_f64.sqrt() * (m.jx as f64 * PI * x[0]).sin(),
            SeparableDomain::Rectangle { width, height } => {
                2.0 / (width * height).sqrt()
                    * (m.jx as f64 * PI * x[0] / width).sin()
                    * (m.jy as f64 * PI * x[1] / height).sin()
            }
        }
    }

    /// Distance to the boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self.domain {
            SeparableDomain::Interval => x[0].min(1.0 - x[0]),
            SeparableDomain::Rectangle { width, height } => x[0]
                .min(width - x[0])
                .min(x[1])
                .min(height - x[1]),
        }
    }
}

/// Value of the operator with a reported truncation-tail scale.
#[derive(Debug, Clone, Copy)]
pub struct SpectralValue {
    pub value: f64,
    pub tail_estimate: f64,
}

/// Sum lambda_j^s u_j phi_j(x) for user-supplied coefficients.
pub fn spectral_apply(coeffs: &[f64], s: f64, basis: &EigenBasis, x: &[f64]) -> Result<SpectralValue> {
    if coeffs.len() > basis.len() {
        return Err(Error::domain("coeffs", "more coefficients than basis modes"));
    }
    if !(0.0 < s && s <= 1.0) {
        return Err(Error::domain("s", "spectral power must lie in (0, 1]"));
    }
    let mut value = 0.0;
    for (k, &c) in coeffs.iter().enumerate() {
        value += basis.eigenvalue(k).powf(s) * c * basis.eigenfunction(k, x);
    }
    let tail_estimate = coeffs
        .last()
        .map(|c| basis.eigenvalue(coeffs.len() - 1).powf(s) * c.abs())
        .unwrap_or(0.0);
    Ok(SpectralValue {
        value,
        tail_estimate,
    })
}

/// Dirichlet heat kernel by eigen-sum, with the truncation chosen so the
/// dropped tail is below 1e-12; errors out with a suggested minimum time
/// when that would need more modes than the cap.
pub fn heat_kernel(t: f64, x: &[f64], y: &[f64], basis: &EigenBasis) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::domain("t", "time must be positive"));
    }
    // scan the actual spectrum: stop once the remaining tail (bounded by
    // mode count times the next exponential weight) is below 1e-12
    let cap = 4000usize.min(basis.len());
    let mut needed = None;
    for k in 0..cap {
        let w = (-basis.eigenvalue(k) * t).exp();
        if w * (k as f64 + 16.0) < 1e-13 {
            needed = Some(k + 1);
            break;
        }
    }
    let Some(needed) = needed else {
        let suggestion = 28.0 / basis.eigenvalue(cap - 1);
        return Err(Error::resolution(format!(
            "heat kernel truncation cannot reach 1e-12 at t = {t} with {cap} modes; \
             increase t above ~{suggestion:.2e} or use the image series"
        )));
    };
    let mut acc = 0.0;
    for k in 0..needed {
        acc += (-basis.eigenvalue(k) * t).exp()
            * basis.eigenfunction(k, x)
            * basis.eigenfunction(k, y);
    }
    Ok(acc)
}

/// Integrate g(t) weight t^{w_pow} over (0, T] in log-time: the Gaussian
/// turn-on of the heat kernel is O(1) wide in log t, so uniform panels
/// there resolve it for every pair of points.
fn log_time_head<G: Fn(f64) -> f64>(t_top: f64, w_pow: f64, floor_scale: f64, g: G) -> f64 {
    let gauss = GaussRule::legendre(10);
    // below t = floor_scale/400 the Gaussian factor is under 1e-44
    let lam_min = (floor_scale / 400.0).max(1e-60).ln();
    let lam_max = t_top.ln();
    if lam_max <= lam_min {
        return 0.0;
    }
    let panels = (((lam_max - lam_min) / 0.5).ceil() as usize).max(4);
    let mut acc = 0.0;
    for k in 0..panels {
        let a = lam_min + (lam_max - lam_min) * k as f64 / panels as f64;
        let b = lam_min + (lam_max - lam_min) * (k + 1) as f64 / panels as f64;
        acc += gauss.integrate(a, b, |lam| {
            let t = lam.exp();
            g(t) * t.powf(w_pow + 1.0)
        });
    }
    acc
}

/// Gaussian on the line.
fn gauss_heat(t: f64, xi: f64) -> f64 {
    (-xi * xi / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// Dirichlet heat kernel of (0, L) by the method of images; fast and
/// accurate for small times.
fn heat_kernel_images_1d(t: f64, x: f64, y: f64, length: f64) -> f64 {
    let k_max = 2 + (46.0_f64 * t).sqrt().ceil() as i64;
    let mut acc = 0.0;
    for k in -k_max..=k_max {
        let shift = 2.0 * k as f64 * length;
        acc += gauss_heat(t, x - y - shift) - gauss_heat(t, x + y - shift);
    }
    acc
}

/// Image-series heat kernel on the basis domain.
pub fn heat_kernel_images(t: f64, x: &[f64], y: &[f64], basis: &EigenBasis) -> f64 {
    match basis.domain {
        SeparableDomain::Interval => heat_kernel_images_1d(t, x[0], y[0], 1.0),
        SeparableDomain::Rectangle { width, height } => {
            heat_kernel_images_1d(t, x[0], y[0], width) * heat_kernel_images_1d(t, x[1], y[1], height)
        }
    }
}

/// Heat kernel by whichever route is accurate at this time.
fn heat_kernel_any(t: f64, x: &[f64], y: &[f64], basis: &EigenBasis) -> f64 {
    if t < 0.2 {
        heat_kernel_images(t, x, y, basis)
    } else {
        heat_kernel(t, x, y, basis).unwrap_or_else(|_| heat_kernel_images(t, x, y, basis))
    }
}

/// Survival probability int_Omega p(t,x,y) dy on the interval, by images
/// (small t) or the eigen route (large t).
pub fn survival(t: f64, x: f64) -> f64 {
    if t < 0.2 {
        let k_max = 2 + (46.0_f64 * t).sqrt().ceil() as i64;
        let mut acc = 0.0;
        let root = 2.0 * t.sqrt();
        for k in -k_max..=k_max {
            let shift = 2.0 * k as f64;
            // int_0^1 of the direct and reflected Gaussians
            acc += 0.5 * (erf((x - shift) / root) - erf((x - shift - 1.0) / root));
            acc -= 0.5 * (erf((x - shift + 1.0) / root) - erf((x - shift) / root));
        }
        acc
    } else {
        // sum over odd modes: e^{-lambda_j t} phi_j(x) * int phi_j
        let mut acc = 0.0;
        let mut j = 1;
        loop {
            let lam = (j as f64 * PI).powi(2);
            let term = (-lam * t).exp() * 2.0 * (j as f64 * PI * x).sin()
                * (1.0 - (j as f64 * PI).cos())
                / (j as f64 * PI);
            acc += term;
            if (-lam * t).exp() < 1e-17 || j > 4000 {
                break;
            }
            j += 2;
        }
        acc
    }
}

/// Split time for the subordination integrals: images below, analytic
/// eigen tails above.
const T_SPLIT: f64 = 0.1;

/// Subordinated Green function G^s(x,y) = (1/Gamma(s)) int_0^inf p t^{s-1} dt.
pub fn green_subordinate(s: f64, x: &[f64], y: &[f64], basis: &EigenBasis) -> Result<f64> {
    KernelParams::new(1, s.min(0.999))?;
    let same = x
        .iter()
        .zip(y)
        .all(|(a, b)| (a - b).abs() < 1e-14);
    if same {
        return Err(Error::domain("y", "Green function needs x != y"));
    }
    // head: images kernel against t^{s-1} on (0, T_SPLIT], in log time
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let head = log_time_head(T_SPLIT, s - 1.0, d2 / 4.0, |t| {
        heat_kernel_images(t, x, y, basis)
    }) / gamma(s);
    // tail: sum_j phi_j(x) phi_j(y) lambda_j^{-s} Q(s, lambda_j T)
    let mut tail = 0.0;
    for k in 0..basis.len() {
        let lam = basis.eigenvalue(k);
        if lam * T_SPLIT > 45.0 {
            break;
        }
        tail += basis.eigenfunction(k, x)
            * basis.eigenfunction(k, y)
            * lam.powf(-s)
            * gamma_q(s, lam * T_SPLIT)?;
    }
    Ok(head + tail)
}

/// Spectral-sum route for the interval Green function,
/// sum_j 2 (j pi)^{-2s} sin(j pi x) sin(j pi y), accelerated by repeated
/// summation by parts (the series converges only conditionally for s < 1/2).
pub fn green_spectral_sum(s: f64, x: f64, y: f64) -> Result<f64> {
    if (x - y).abs() < 1e-14 {
        return Err(Error::domain("y", "spectral sum needs x != y"));
    }
    // 2 sin a sin b = cos(a-b) - cos(a+b)
    let c_minus = trig_power_series(2.0 * s, PI * (x - y))?;
    let c_plus = trig_power_series(2.0 * s, PI * (x + y))?;
    Ok(PI.powf(-2.0 * s) * (c_minus - c_plus))
}

/// sum_{j>=1} j^{-q} cos(j theta) for q in (0, 2), theta not a multiple of
/// 2 pi: partial sum to N plus a tail from the summation-by-parts recursion
/// T_N(a) = a_{N+1} z^{N+1}/(1-z) + (z/(1-z)) T_N(Delta a).
fn trig_power_series(q: f64, theta: f64) -> Result<f64> {
    let theta = theta.rem_euclid(2.0 * PI);
    if theta.abs() < 1e-12 || (theta - 2.0 * PI).abs() < 1e-12 {
        return Err(Error::domain("theta", "trigonometric series diverges at 0 mod 2pi"));
    }
    let n = 4000usize;
    let (zc, zs) = (theta.cos(), theta.sin());
    // partial sum via the recurrence for cos(j theta)
    let mut acc = 0.0;
    let mut cj = zc;
    let mut sj = zs;
    for j in 1..=n {
        acc += (j as f64).powf(-q) * cj;
        let c_next = cj * zc - sj * zs;
        sj = cj * zs + sj * zc;
        cj = c_next;
    }
    // tail by K-fold summation by parts; complex arithmetic inline
    let k_depth = 5usize;
    let (re_z, im_z) = (theta.cos(), theta.sin());
    // 1/(1-z)
    let denom = (1.0 - re_z) * (1.0 - re_z) + im_z * im_z;
    let inv_re = (1.0 - re_z) / denom;
    let inv_im = im_z / denom;
    // z^{N+1}
    let ang = theta * (n as f64 + 1.0);
    let (pw_re, pw_im) = (ang.cos(), ang.sin());
    // recursion multiplier -z/(1-z): summation by parts flips the sign of
    // each successive difference order
    let m_re = -(re_z * inv_re - im_z * inv_im);
    let m_im = -(re_z * inv_im + im_z * inv_re);
    // forward differences of a_j = j^{-q} at j = N+1
    let a = |j: f64| j.powf(-q);
    let base = (n + 1) as f64;
    let mut diffs = vec![0.0f64; k_depth];
    for (k, d) in diffs.iter_mut().enumerate() {
        // Delta^k a at N+1: sum_{i} (-1)^i C(k,i) a(N+1+i)
        let mut acc_d = 0.0;
        let mut binom = 1.0;
        for i in 0..=k {
            acc_d += binom * a(base + i as f64) * if i % 2 == 0 { 1.0 } else { -1.0 };
            binom *= (k - i) as f64 / (i + 1) as f64;
        }
        *d = acc_d;
    }
    // T = sum_k m^k * z^{N+1} * diffs[k] / (1-z)
    let mut tail_re = 0.0;
    let (mut mk_re, mut mk_im) = (1.0, 0.0);

    for &d in diffs.iter() {
        // term = m^k * z^{N+1} * inv * d
        let t1_re = mk_re * pw_re - mk_im * pw_im;
        let t1_im = mk_re * pw_im + mk_im * pw_re;
        let t2_re = t1_re * inv_re - t1_im * inv_im;
        tail_re += t2_re * d;
        let next_re = mk_re * m_re - mk_im * m_im;
        mk_im = mk_re * m_im + mk_im * m_re;
        mk_re = next_re;
    }
    Ok(acc + tail_re)
}

/// Jumping kernel and killing measure of the subordinate killed motion.
#[derive(Debug, Clone, Copy)]
pub struct JumpKill {
    pub jump: f64,
    pub kill_at_x: f64,
}

pub fn jump_and_kill(x: &[f64], y: &[f64], s: f64, basis: &EigenBasis) -> Result<JumpKill> {
    KernelParams::new(1, s.min(0.999))?;
    if basis.domain != SeparableDomain::Interval {
        return Err(Error::domain("domain", "jump/kill route implemented on the interval"));
    }
    let same = (x[0] - y[0]).abs() < 1e-14;
    if same {
        return Err(Error::domain("y", "jumping kernel needs x != y"));
    }
    let pref = s / gamma(1.0 - s);
    // J head: strong t^{-1-s} weight, Gaussian-suppressed at 0 for x != y
    let d2 = (x[0] - y[0]) * (x[0] - y[0]);
    let head_j = log_time_head(T_SPLIT, -1.0 - s, d2 / 4.0, |t| {
        heat_kernel_images(t, x, y, basis)
    });
    // J tail: sum_j phi phi int_T^inf e^{-lam t} t^{-1-s} dt
    //       = sum_j phi phi lam^s Gamma(-s, lam T)
    let mut tail_j = 0.0;
    for k in 0..basis.len() {
        let lam = basis.eigenvalue(k);
        if lam * T_SPLIT > 45.0 {
            break;
        }
        tail_j += basis.eigenfunction(k, x)
            * basis.eigenfunction(k, y)
            * lam.powf(s)
            * gamma_upper(-s, lam * T_SPLIT)?;
    }
    let jump = pref * (head_j + tail_j);

    let kill_at_x = kill_measure(x[0], s, basis)?;
    Ok(JumpKill { jump, kill_at_x })
}

/// kappa(x) = (s/Gamma(1-s)) int_0^inf (1 - survival(t,x)) t^{-1-s} dt.
pub fn kill_measure(x: f64, s: f64, _basis: &EigenBasis) -> Result<f64> {
    if !(0.0 < x && x < 1.0) {
        return Err(Error::domain("x", "interior point required"));
    }
    let pref = s / gamma(1.0 - s);
    let delta = x.min(1.0 - x);
    let head = log_time_head(T_SPLIT, -1.0 - s, delta * delta / 4.0, |t| 1.0 - survival(t, x));
    // tail: int_T^inf t^{-1-s} dt - sum_j c_j int_T^inf e^{-lam t} t^{-1-s}
    // with c_j = phi_j(x) int phi_j (odd modes only)
    let mut tail = T_SPLIT.powf(-s) / s;
    let mut j = 1usize;
    loop {
        let lam = (j as f64 * PI).powi(2);
        if lam * T_SPLIT > 45.0 {
            break;
        }
        let cj = 2.0 * (j as f64 * PI * x).sin() * (1.0 - (j as f64 * PI).cos()) / (j as f64 * PI);
        tail -= cj * lam.powf(s) * gamma_upper(-s, lam * T_SPLIT)?;
        j += 2;
    }
    Ok(pref * (head + tail))
}

/// Spectral Poisson kernel P^s(x, b) = -d/dnu_y G^s(x, y) at the boundary
/// point b, by a one-sided second-order finite difference of the
/// subordinated Green function with step delta(x)/100.
pub fn spectral_poisson(x: &[f64], b: &[f64], s: f64, basis: &EigenBasis) -> Result<f64> {
    let delta = basis.boundary_distance(x);
    if delta <= 0.0 {
        return Err(Error::domain("x", "interior point required"));
    }
    let h = (delta / 100.0).min(1e-3);
    let inward = inward_normal(b, basis)?;
    let y1: Vec<f64> = b.iter().zip(&inward).map(|(bb, n)| bb + h * n).collect();
    let y2: Vec<f64> = b.iter().zip(&inward).map(|(bb, n)| bb + 2.0 * h * n).collect();
    let g1 = green_subordinate(s, x, &y1, basis)?;
    let g2 = green_subordinate(s, x, &y2, basis)?;
    Ok((4.0 * g1 - g2) / (2.0 * h))
}

fn inward_normal(b: &[f64], basis: &EigenBasis) -> Result<Vec<f64>> {
    match basis.domain {
        SeparableDomain::Interval => {
            if b[0].abs() < 1e-12 {
                Ok(vec![1.0])
            } else if (b[0] - 1.0).abs() < 1e-12 {
                Ok(vec![-1.0])
            } else {
                Err(Error::domain("b", "boundary point of (0,1) must be 0 or 1"))
            }
        }
        SeparableDomain::Rectangle { width, height } => {
            let eps = 1e-12;
            if b[0].abs() < eps {
                Ok(vec![1.0, 0.0])
            } else if (b[0] - width).abs() < eps {
                Ok(vec![-1.0, 0.0])
            } else if b[1].abs() < eps {
                Ok(vec![0.0, 1.0])
            } else if (b[1] - height).abs() < eps {
                Ok(vec![0.0, -1.0])
            } else {
                Err(Error::domain("b", "point is not on the rectangle boundary"))
            }
        }
    }
}

/// Cesaro (C,2) acceleration of the Poisson-kernel eigen-series on the
/// interval; cross-check for the finite-difference route.
pub fn spectral_poisson_cesaro(x: f64, b: f64, s: f64, n_terms: usize) -> Result<f64> {
    let sign_site = if b.abs() < 1e-12 {
        1.0
    } else if (b - 1.0).abs() < 1e-12 {
        -1.0
    } else {
        return Err(Error::domain("b", "boundary point of (0,1) must be 0 or 1"));
    };
    // -d/dnu phi_j at 0 is sqrt2 j pi; at 1 it is -sqrt2 j pi cos(j pi)
    let term = |j: usize| -> f64 {
        let jf = j as f64;
        let deriv = if sign_site > 0.0 {
            2.0_f64.sqrt() * jf * PI
        } else {
            -(2.0_f64.sqrt()) * jf * PI * (jf * PI).cos()
        };
        (jf * PI).powf(-2.0 * s) * 2.0_f64.sqrt() * (jf * PI * x).sin() * deriv
    };
    let mut partial = Vec::with_capacity(n_terms);
    let mut acc = 0.0;
    for j in 1..=n_terms {
        acc += term(j);
        partial.push(acc);
    }
    // (C,2): sigma_n = 2/( (n+1)(n+2) ) sum_k (n-k+1) s_k
    let n = partial.len();
    let mut num = 0.0;
    for (k, sk) in partial.iter().enumerate() {
        num += (n - k) as f64 * sk;
    }
    Ok(num * 2.0 / (n as f64 * (n as f64 + 1.0)))
}

/// h1(x): the boundary-kernel mass, the natural blow-up profile of the
/// spectral operator.
pub fn h1_weight(x: &[f64], s: f64, basis: &EigenBasis) -> Result<f64> {
    match basis.domain {
        SeparableDomain::Interval => {
            Ok(spectral_poisson(x, &[0.0], s, basis)? + spectral_poisson(x, &[1.0], s, basis)?)
        }
        SeparableDomain::Rectangle { width, height } => {
            // boundary quadrature over the four edges
            let gauss = GaussRule::legendre(16);
            let mut acc = 0.0;
            for edge in 0..4 {
                let (len, to_point): (f64, Box<dyn Fn(f64) -> Vec<f64>>) = match edge {
                    0 => (width, Box::new(move |t| vec![t, 0.0])),
                    1 => (width, Box::new(move |t| vec![t, height])),
                    2 => (height, Box::new(move |t| vec![0.0, t])),
                    _ => (height, Box::new(move |t| vec![width, t])),
                };
                let mut panels = vec![0.0, 0.25 * len, 0.5 * len, 0.75 * len, len];
                panels.dedup();
                for w in panels.windows(2) {
                    acc += gauss.integrate(w[0].max(1e-6), w[1].min(len - 1e-6), |t| {
                        spectral_poisson(x, &to_point(t), s, basis).unwrap_or(0.0)
                    });
                }
            }
            Ok(acc)
        }
    }
}

/// Linear solve u = int G^s(x,y) mu(y) dy + sum_b P^s(x,b) zeta(b) on the
/// interval (zeta given at the two endpoints).
pub fn spectral_solve<F>(
    mu: F,
    zeta: (f64, f64),
    x: f64,
    s: f64,
    basis: &EigenBasis,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if basis.domain != SeparableDomain::Interval {
        return Err(Error::domain("domain", "spectral_solve runs on the interval"));
    }
    if !(0.0 < x && x < 1.0) {
        return Err(Error::domain("x", "interior point required"));
    }
    let gauss = GaussRule::legendre(10);
    // split at the diagonal y = x; the Green function is kinked there
    let xs = [x];
    let integrand = |y: f64| mu(y) * green_subordinate(s, &xs, &[y], basis).unwrap_or(0.0);
    let greens = crate::quad::integrate_algebraic_end_clamped(&gauss, 0.0, x, 0.0, 1e-8, |y, _| {
        integrand(y)
    }) + crate::quad::integrate_algebraic_start_clamped(&gauss, x, 1.0, 0.0, 1e-8, |y, _| {
        integrand(y)
    });
    let p0 = spectral_poisson(&xs, &[0.0], s, basis)?;
    let p1 = spectral_poisson(&xs, &[1.0], s, basis)?;
    Ok(greens + zeta.0 * p0 + zeta.1 * p1)
}

/// Radial... no: interval grid Green operator for the spectral Laplacian,
/// mirroring the ball solver: hats on a doubly graded grid of (0,1) with
/// boundary lumps so the basis sums to one.
pub struct SpectralGreenSolver {
    pub s: f64,
    pub nodes: Vec<f64>,
    weights: Vec<Vec<f64>>,
    h1: Vec<f64>,
}

impl SpectralGreenSolver {
    pub fn new(s: f64, basis: &EigenBasis, n_bulk: usize, delta_min: f64) -> Result<Self> {
        if basis.domain != SeparableDomain::Interval {
            return Err(Error::domain("domain", "ladder solver runs on the interval"));
        }
        let mut nodes: Vec<f64> = Vec::new();
        let layers = ((0.25 / delta_min).log2().ceil() * 2.0) as usize;
        for k in 0..=layers {
            let d = 0.25 * (delta_min / 0.25).powf(k as f64 / layers as f64);
            nodes.push(d);
            nodes.push(1.0 - d);
        }
        for k in 1..n_bulk {
            nodes.push(0.25 + 0.5 * k as f64 / n_bulk as f64);
        }
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let n = nodes.len();
        let gauss = GaussRule::legendre(8);
        let mut weights = vec![vec![0.0; n]; n];
        for i in 0..n {
            let xi = [nodes[i]];
            let kernel = |y: f64| green_subordinate(s, &xi, &[y], basis).unwrap_or(0.0);
            for j in 0..n {
                let lo = if j == 0 { 0.0 } else { nodes[j - 1] };
                let mid = nodes[j];
                let hi = if j + 1 < n { nodes[j + 1] } else { 1.0 };
                let mut acc = 0.0;
                if mid > lo {
                    let f = |y: f64| {
                        let hat = if j == 0 { 1.0 } else { (y - lo) / (mid - lo) };
                        kernel(y) * hat
                    };
                    acc += split_at(&gauss, lo, mid, nodes[i], &f);
                }
                if hi > mid {
                    let f = |y: f64| {
                        let hat = if j + 1 == n { 1.0 } else { (hi - y) / (hi - mid) };
                        kernel(y) * hat
                    };
                    acc += split_at(&gauss, mid, hi, nodes[i], &f);
                }
                weights[i][j] = acc;
            }
        }
        let h1 = nodes
            .iter()
            .map(|&t| h1_weight(&[t], s, basis))
            .collect::<Result<Vec<f64>>>()?;
        Ok(SpectralGreenSolver {
            s,
            nodes,
            weights,
            h1,
        })
    }

    pub fn apply(&self, source: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(source).map(|(w, f)| w * f).sum())
            .collect()
    }

    pub fn h1_values(&self) -> &[f64] {
        &self.h1
    }

    pub fn interp(&self, values: &[f64], t: f64) -> f64 {
        match self
            .nodes
            .binary_search_by(|a| a.partial_cmp(&t).unwrap())
        {
            Ok(j) => values[j],
            Err(0) => values[0],
            Err(j) if j >= self.nodes.len() => *values.last().unwrap(),
            Err(j) => {
                let (a, b) = (self.nodes[j - 1], self.nodes[j]);
                let w = (t - a) / (b - a);
                values[j - 1] * (1.0 - w) + values[j] * w
            }
        }
    }
}

fn split_at<F: Fn(f64) -> f64>(gauss: &GaussRule, a: f64, b: f64, diag: f64, f: &F) -> f64 {
    if diag > a + 1e-14 && diag < b - 1e-14 {
        crate::quad::integrate_algebraic_end_clamped(gauss, a, diag, 0.0, (diag - a) * 1e-7, |t, _| f(t))
            + crate::quad::integrate_algebraic_start_clamped(gauss, diag, b, 0.0, (b - diag) * 1e-7, |t, _| {
                f(t)
            })
    } else if diag <= a + 1e-14 {
        crate::quad::integrate_algebraic_start_clamped(gauss, a, b, 0.0, (b - a) * 1e-7, |t, _| f(t))
    } else {
        crate::quad::integrate_algebraic_end_clamped(gauss, a, b, 0.0, (b - a) * 1e-7, |t, _| f(t))
    }
}

/// Large-solution ladder report.
#[derive(Debug, Clone)]
pub struct SpectralLadder {
    /// probe values per level
    pub iterates: Vec<Vec<f64>>,
    pub monotone: bool,
    pub envelope_ok: bool,
    /// fitted blow-up exponent of the top level along its boundary layer
    pub envelope_exponent: f64,
}

/// Levels u_j solving the spectral problem with u_j / h1 = j on the boundary
/// and the absorbing power source, by the damped fixed point
/// v = G^s[(j h1 - v)^p] on the sandwich 0 <= v <= j h1.
pub fn large_solution_spectral(
    p: f64,
    s: f64,
    solver: &SpectralGreenSolver,
    levels: &[f64],
    probes: &[f64],
) -> Result<SpectralLadder> {
    let (lo, hi) = crate::semilinear::power_range(s, crate::semilinear::OperatorKind::Spectral)?;
    if !(p > lo && p < hi) {
        return Err(Error::domain(
            "p",
            format!("exponent must lie in the spectral range ({lo}, {hi}), got {p}"),
        ));
    }
    let n = solver.nodes.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut top_u: Vec<f64> = Vec::new();
    for &level in levels {
        let harm: Vec<f64> = solver.h1.iter().map(|h| level * h).collect();
        // damped Newton on F(v) = v - G[(harm - v)^p], monotone from v = 0
        let mut v = vec![0.0; n];
        let mut converged = false;
        for _ in 0..200 {
            let src: Vec<f64> = harm
                .iter()
                .zip(&v)
                .map(|(h, vi)| (h - vi).max(0.0).powf(p))
                .collect();
            let gv = solver.apply(&src);
            // residual r = v - G src; Newton step with slopes p (h-v)^{p-1}
            let slope: Vec<f64> = harm
                .iter()
                .zip(&v)
                .map(|(h, vi)| p * (h - vi).max(0.0).powf(p - 1.0))
                .collect();
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    a[i][j] = solver.weights[i][j] * slope[j];
                }
                a[i][i] += 1.0;
            }
            let rhs: Vec<f64> = (0..n).map(|i| gv[i] - v[i]).collect();
            let step = crate::semilinear::solve_dense(a, rhs)?;
            let mut max_rel = 0.0f64;
            for i in 0..n {
                let nv = (v[i] + step[i]).clamp(0.0, harm[i]);
                max_rel = max_rel.max((nv - v[i]).abs() / harm[i].max(1e-300));
                v[i] = nv;
            }
            if max_rel < 1e-10 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::convergence(
                "spectral fixed point not contractive within the iteration cap",
            ));
        }
        let u: Vec<f64> = harm.iter().zip(&v).map(|(h, vi)| h - vi).collect();
        rows.push(probes.iter().map(|&t| solver.interp(&u, t)).collect());
        top_u = u;
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| *b >= *a - 1e-8));
    // envelope: fitted blow-up rate of the top level against delta
    let mut pts = Vec::new();
    for (&t, &u) in solver.nodes.iter().zip(&top_u) {
        let delta = t.min(1.0 - t);
        if delta < 0.05 && delta > 1e-4 && t < 0.5 && u > 0.0 {
            pts.push((delta.ln(), u.ln()));
        }
    }
    if pts.len() < 4 {
        return Err(Error::resolution("not enough boundary-layer nodes for the envelope fit"));
    }
    let nn = pts.len() as f64;
    let sx: f64 = pts.iter().map(|q| q.0).sum();
    let sy: f64 = pts.iter().map(|q| q.1).sum();
    let sxx: f64 = pts.iter().map(|q| q.0 * q.0).sum();
    let sxy: f64 = pts.iter().map(|q| q.0 * q.1).sum();
    let envelope_exponent = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    let envelope_ok = envelope_exponent >= -2.0 * s / (p - 1.0) - 0.05;
    Ok(SpectralLadder {
        iterates: rows,
        monotone,
        envelope_ok,
        envelope_exponent,
    })
}
