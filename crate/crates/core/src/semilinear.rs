//! Keller-Osserman machinery for boundary blow-up: the profile functions
//! phi and psi, admissibility classification, the explicit supersolution
//! mu psi(delta^s) + lambda xi, and monotone iteration schemes on the unit
//! ball driven by either the closed-form ball Green function or
//! walk-on-spheres.
//!
//! Admissibility thresholds are decided symbolically for the three named
//! profile families and by tail-exponent fitting with a 0.05 dead zone for
//! everything else.

use std::sync::Arc;

use crate::ball_solver::{martin_normalizer, poisson_solve_ball};
use crate::error::{Error, Result};
use crate::geom::{norm, point1, point2, Point};
use crate::kernels::{torsion_ball, BallGeometry, KernelParams};
use crate::pv_eval::{QuadConfig, ScalarField};
use crate::quad::GaussRule;
use crate::special::{beta_inc, gamma, ln_gamma};
use crate::wos::{wos_estimate, Domain, WalkConfig};

/// The three families with closed-form admissibility thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileFamily {
    /// f(t) = t^p
    Power { p: f64 },
    /// f(t) = t^{1+2s} ln^alpha(1+t)
    LowerLogCritical { s: f64, alpha: f64 },
    /// f(t) = t^{(1+s)/(1-s)} ln^{-beta}(1+t)
    UpperLogCritical { s: f64, beta: f64 },
    Custom,
}

/// Nonlinearity with its derivative, antiderivative and structural bounds:
/// 1+m <= t f'(t)/f(t) <= 1+M.
#[derive(Clone)]
pub struct NonlinearProfile {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    fprime: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    antiderivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub m: f64,
    pub big_m: f64,
    pub family: ProfileFamily,
}

impl NonlinearProfile {
    pub fn power(p: f64) -> Result<Self> {
        if p <= 1.0 {
            return Err(Error::domain("p", "power profiles need p > 1 for 0 < m <= M"));
        }
        Ok(NonlinearProfile {
            f: Arc::new(move |t| t.powf(p)),
            fprime: Arc::new(move |t| p * t.powf(p - 1.0)),
            antiderivative: Arc::new(move |t| t.powf(p + 1.0) / (p + 1.0)),
            m: p - 1.0,
            big_m: p - 1.0,
            family: ProfileFamily::Power { p },
        })
    }

    /// f(t) = t^{1+2s} ln^alpha(1+t); t f'/f lies in [1+2s, 1+2s+alpha].
    pub fn lower_log_critical(s: f64, alpha: f64) -> Result<Self> {
        KernelParams::new(1, s)?;
        if alpha <= 0.0 {
            return Err(Error::domain("alpha", "log weight must be positive"));
        }
        let f = move |t: f64| t.powf(1.0 + 2.0 * s) * (1.0 + t).ln().powf(alpha);
        let fp = move |t: f64| {
            (1.0 + 2.0 * s) * t.powf(2.0 * s) * (1.0 + t).ln().powf(alpha)
                + t.powf(1.0 + 2.0 * s) * alpha * (1.0 + t).ln().powf(alpha - 1.0) / (1.0 + t)
        };
        Ok(NonlinearProfile {
            f: Arc::new(f),
            fprime: Arc::new(fp),
            antiderivative: Arc::new(move |t| quadrature_antiderivative(&f, t)),
            m: 2.0 * s,
            big_m: 2.0 * s + alpha,
            family: ProfileFamily::LowerLogCritical { s, alpha },
        })
    }

    /// f(t) = t^{(1+s)/(1-s)} ln^{-beta}(1+t).
    pub fn upper_log_critical(s: f64, beta: f64) -> Result<Self> {
        KernelParams::new(1, s)?;
        let q = (1.0 + s) / (1.0 - s);
        if beta <= 0.0 || beta >= q - 1.0 {
            return Err(Error::domain(
                "beta",
                format!("log weight must lie in (0, {})", q - 1.0),
            ));
        }
        let f = move |t: f64| t.powf(q) * (1.0 + t).ln().powf(-beta);
        let fp = move |t: f64| {
            q * t.powf(q - 1.0) * (1.0 + t).ln().powf(-beta)
                - t.powf(q) * beta * (1.0 + t).ln().powf(-beta - 1.0) / (1.0 + t)
        };
        Ok(NonlinearProfile {
            f: Arc::new(f),
            fprime: Arc::new(fp),
            antiderivative: Arc::new(move |t| quadrature_antiderivative(&f, t)),
            m: q - 1.0 - beta,
            big_m: q - 1.0,
            family: ProfileFamily::UpperLogCritical { s, beta },
        })
    }

    /// User-supplied profile with declared bounds; classified numerically.
    pub fn custom<F, D, A>(f: F, fprime: D, antiderivative: A, m: f64, big_m: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        A: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        NonlinearProfile {
            f: Arc::new(f),
            fprime: Arc::new(fprime),
            antiderivative: Arc::new(antiderivative),
            m,
            big_m,
            family: ProfileFamily::Custom,
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn fprime(&self, t: f64) -> f64 {
        (self.fprime)(t)
    }

    pub fn antiderivative(&self, t: f64) -> f64 {
        (self.antiderivative)(t)
    }
}

/// F(t) = int_0^t f for profiles without a closed-form antiderivative;
/// geometric panels resolve the vanishing at 0.
fn quadrature_antiderivative<F: Fn(f64) -> f64>(f: &F, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let gauss = GaussRule::legendre(10);
    let mut acc = 0.0;
    let mut hi = t;
    for _ in 0..60 {
        let lo = hi * 0.5;
        acc += gauss.integrate(lo, hi, f);
        hi = lo;
        if hi < t * 1e-14 {
            break;
        }
    }
    acc + f(hi) * hi / 2.0
}

/// Empirical structural-bound check of t f'(t)/f(t) - 1 over a grid.
#[derive(Debug, Clone, Copy)]
pub struct ProfileCheck {
    pub m_hat: f64,
    pub big_m_hat: f64,
    pub ok: bool,
}

pub fn profile_check(p: &NonlinearProfile, grid: &[f64]) -> Result<ProfileCheck> {
    if grid.is_empty() {
        return Err(Error::domain("grid", "empty grid"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &t in grid {
        if t <= 0.0 {
            return Err(Error::domain("grid", "grid must lie in (0, inf)"));
        }
        let ft = p.f(t);
        let fpt = p.fprime(t);
        if !(ft > 0.0) || !(fpt > 0.0) {
            return Err(Error::domain("p", format!("nonpositive f or f' at t = {t}")));
        }
        let ratio = t * fpt / ft - 1.0;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    let ok = lo > 0.0 && hi.is_finite() && p.m <= lo + 1e-12 && hi <= p.big_m + 1e-12;
    Ok(ProfileCheck {
        m_hat: lo,
        big_m_hat: hi,
        ok,
    })
}

/// phi(u) = int_u^inf dt / sqrt(F(t)), by geometric panels plus a local
/// power-model tail.
pub fn phi_eval(p: &NonlinearProfile, u: f64) -> Result<f64> {
    if u <= 0.0 {
        return Err(Error::domain("u", "phi is defined for u > 0"));
    }
    let gauss = GaussRule::legendre(12);
    let integrand = |t: f64| p.antiderivative(t).powf(-0.5);
    let mut acc = 0.0;
    let mut lo = u;
    for _ in 0..200 {
        let hi = lo * 2.0;
        acc += gauss.integrate(lo, hi, integrand);
        // local exponent of F at the frontier decides the tail model
        let eta = (p.antiderivative(2.0 * hi) / p.antiderivative(hi)).ln() / 2.0f64.ln();
        if eta <= 2.0 + 0.05 {
            if hi > u * 1e12 {
                return Err(Error::ko_violation(
                    "tail of int dt/sqrt(F) does not converge (growth too slow)",
                ));
            }
            lo = hi;
            continue;
        }
        let tail = hi / (p.antiderivative(hi).sqrt() * (eta / 2.0 - 1.0));
        if tail < 1e-12 * acc.max(1e-300) {
            return Ok(acc + tail);
        }
        if hi > u * 1e15 {
            return Ok(acc + tail);
        }
        lo = hi;
    }
    Err(Error::convergence("phi quadrature did not settle"))
}

/// psi = phi^{-1} by bracketing and bisection to relative 1e-10.
pub fn psi_eval(p: &NonlinearProfile, v: f64) -> Result<f64> {
    if v <= 0.0 {
        return Err(Error::domain("v", "psi is defined for v > 0"));
    }
    // phi is decreasing: expand a bracket [lo, hi] with phi(hi) <= v <= phi(lo)
    let mut lo = 1.0f64;
    let mut hi = 1.0f64;
    let mut phi_lo = phi_eval(p, lo)?;
    let mut guard = 0;
    while phi_lo < v {
        lo *= 0.25;
        phi_lo = phi_eval(p, lo)?;
        guard += 1;
        if guard > 400 {
            return Err(Error::convergence("psi bracket expansion failed (small side)"));
        }
    }
    let mut phi_hi = phi_eval(p, hi)?;
    guard = 0;
    while phi_hi > v {
        hi *= 4.0;
        phi_hi = phi_eval(p, hi)?;
        guard += 1;
        if guard > 400 {
            return Err(Error::convergence("psi bracket expansion failed (large side)"));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let phi_mid = phi_eval(p, mid)?;
        if phi_mid > v {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-10 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Tri-state admissibility answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KoFlag {
    True,
    False,
    Undecided,
}

impl KoFlag {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            KoFlag::True => Some(true),
            KoFlag::False => Some(false),
            KoFlag::Undecided => None,
        }
    }
}

/// The three growth conditions controlling existence of large solutions.
#[derive(Debug, Clone, Copy)]
pub struct KoClassification {
    /// int^inf dt/sqrt(F) < inf
    pub ko: KoFlag,
    /// int^inf (t/f)^{1/(2s)} dt < inf
    pub l1: KoFlag,
    /// int^inf f(t) t^{-2/(1-s)} dt < inf
    pub e: KoFlag,
}

/// Decide the three conditions: symbolically for the named families,
/// otherwise by fitted tail exponents with a 0.05 dead zone.
pub fn ko_classify(p: &NonlinearProfile, s: f64) -> Result<KoClassification> {
    KernelParams::new(1, s)?;
    match p.family {
        ProfileFamily::Power { p: pw } => Ok(KoClassification {
            ko: flag(pw > 1.0),
            l1: flag(pw > 1.0 + 2.0 * s),
            e: flag(pw < (1.0 + s) / (1.0 - s)),
        }),
        ProfileFamily::LowerLogCritical { s: sf, alpha } => {
            ensure_family_order(sf, s)?;
            Ok(KoClassification {
                ko: KoFlag::True,
                l1: flag(alpha > 2.0 * s),
                e: KoFlag::True,
            })
        }
        ProfileFamily::UpperLogCritical { s: sf, beta } => {
            ensure_family_order(sf, s)?;
            Ok(KoClassification {
                ko: KoFlag::True,
                l1: KoFlag::True,
                e: flag(beta > 1.0),
            })
        }
        ProfileFamily::Custom => {
            let ko = tail_exponent_flag(|t| p.antiderivative(t).powf(-0.5));
            let l1 = tail_exponent_flag(|t| (t / p.f(t)).powf(1.0 / (2.0 * s)));
            let e = tail_exponent_flag(|t| p.f(t) * t.powf(-2.0 / (1.0 - s)));
            Ok(KoClassification { ko, l1, e })
        }
    }
}

fn flag(b: bool) -> KoFlag {
    if b {
        KoFlag::True
    } else {
        KoFlag::False
    }
}

fn ensure_family_order(family_s: f64, s: f64) -> Result<()> {
    if (family_s - s).abs() > 1e-12 {
        return Err(Error::domain(
            "s",
            "profile family was built for a different fractional order",
        ));
    }
    Ok(())
}

/// Convergence of int^inf g(t) dt decided by the fitted slope of log g
/// against log t on [1e4, 1e9]: converges if slope < -1 - 0.05, diverges
/// if slope > -1 + 0.05, undecided inside the dead zone.
fn tail_exponent_flag<G: Fn(f64) -> f64>(g: G) -> KoFlag {
    let mut pts = Vec::new();
    for k in 0..=10 {
        let t = 1e4 * 10.0f64.powf(k as f64 * 0.5);
        let v = g(t);
        if !(v > 0.0 && v.is_finite()) {
            return KoFlag::Undecided;
        }
        pts.push((t.ln(), v.ln()));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|q| q.0).sum();
    let sy: f64 = pts.iter().map(|q| q.1).sum();
    let sxx: f64 = pts.iter().map(|q| q.0 * q.0).sum();
    let sxy: f64 = pts.iter().map(|q| q.0 * q.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if slope < -1.05 {
        KoFlag::True
    } else if slope > -0.95 {
        KoFlag::False
    } else {
        KoFlag::Undecided
    }
}

/// Which fractional operator a power range refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Restricted,
    Spectral,
}

/// Open interval of exponents p for which the large-solution construction
/// goes through: (1+2s, 1+2s/(1-s)) restricted, (1+s, 1/(1-s)) spectral.
pub fn power_range(s: f64, operator: OperatorKind) -> Result<(f64, f64)> {
    KernelParams::new(1, s)?;
    Ok(match operator {
        OperatorKind::Restricted => (1.0 + 2.0 * s, 1.0 + 2.0 * s / (1.0 - s)),
        OperatorKind::Spectral => (1.0 + s, 1.0 / (1.0 - s)),
    })
}

/// Scale factors of the supersolution mu psi(delta^s) + lambda xi.
#[derive(Debug, Clone, Copy)]
pub struct SupersolutionScale {
    pub mu: f64,
    pub lambda: f64,
}

/// The explicit supersolution on the unit ball evaluated at x.
pub fn supersolution_value(
    p: &NonlinearProfile,
    s: f64,
    x: &Point,
    scale: SupersolutionScale,
) -> Result<f64> {
    if scale.mu < 1.0 {
        return Err(Error::domain("mu", "mu must be at least 1"));
    }
    match ko_classify(p, s)?.l1 {
        KoFlag::True => {}
        KoFlag::False => {
            return Err(Error::ko_violation(
                "profile fails the L1 growth condition: psi(delta^s) is not integrable",
            ))
        }
        KoFlag::Undecided => {
            return Err(Error::ko_violation(
                "L1 growth condition undecided within the fitting dead zone",
            ))
        }
    }
    let params = KernelParams::new(2, s)?;
    let delta = (1.0 - norm(x)).abs();
    if delta <= 0.0 {
        return Err(Error::domain("x", "x on the sphere is a pole of the supersolution"));
    }
    let xi = torsion_ball(params, &BallGeometry::unit(), x);
    Ok(scale.mu * psi_eval(p, delta.powf(s))? + scale.lambda * xi)
}

/// ---------------------------------------------------------------------
/// Monotone iteration schemes on the unit ball.
/// ---------------------------------------------------------------------

/// Green function of the restricted fractional Laplacian on the unit ball,
/// via the classical closed form reduced to a regularized incomplete beta:
/// G(x,y) = k |x-y|^{2s-N} B(s, N/2-s) I_{r0/(1+r0)}(s, N/2-s),
/// r0 = (1-|x|^2)(1-|y|^2)/|x-y|^2. Requires N/2 > s. Validated in tests
/// against the torsion identity and a walk-on-spheres oracle.
pub fn ball_green(params: KernelParams, x: &Point, y: &Point) -> Result<f64> {
    let nf = params.nf();
    let s = params.s;
    if nf / 2.0 <= s {
        return Err(Error::domain("s", "ball Green form needs N/2 > s"));
    }
    let d2 = crate::geom::norm2(&crate::geom::sub(x, y));
    if d2 == 0.0 {
        return Err(Error::domain("y", "Green function pole at x = y"));
    }
    let nx2 = crate::geom::norm2(x);
    let ny2 = crate::geom::norm2(y);
    if nx2 >= 1.0 || ny2 >= 1.0 {
        return Ok(0.0);
    }
    let r0 = (1.0 - nx2) * (1.0 - ny2) / d2;
    let w0 = r0 / (1.0 + r0);
    let ln_k = ln_gamma(nf / 2.0)
        - s * 4.0f64.ln()
        - (nf / 2.0) * std::f64::consts::PI.ln()
        - 2.0 * ln_gamma(s);
    let b_const = gamma(s) * gamma(nf / 2.0 - s) / gamma(nf / 2.0);
    Ok(ln_k.exp() * d2.powf((2.0 * s - nf) / 2.0) * b_const * beta_inc(s, nf / 2.0 - s, w0)?)
}

/// Radial Green operator on the unit ball in the plane: maps a radial
/// source sampled on the grid to the solution values on the same grid.
pub struct BallGreenSolver {
    params: KernelParams,
    /// radii of the grid nodes, increasing, in [0, 1)
    pub radii: Vec<f64>,
    /// w[i][j]: response at radii[i] to the hat source at radii[j]
    weights: Vec<Vec<f64>>,
}

impl BallGreenSolver {
    /// Grid graded toward the boundary down to delta_min.
    pub fn new(params: KernelParams, n_bulk: usize, delta_min: f64) -> Result<Self> {
        KernelParams::new(params.n, params.s)?;
        if params.n != 2 {
            return Err(Error::domain("N", "the radial Green solver is built for N = 2"));
        }
        let mut radii: Vec<f64> = Vec::new();
        for k in 0..n_bulk {
            radii.push(k as f64 / n_bulk as f64 * 0.5);
        }
        // geometric boundary layer from delta = 0.5 down to delta_min
        let layers = ((0.5 / delta_min).log2().ceil() * 2.0) as usize;
        for k in 0..=layers {
            let delta = 0.5 * (delta_min / 0.5).powf(k as f64 / layers as f64);
            radii.push(1.0 - delta);
        }
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.dedup();
        let weights = green_matrix(params, &radii)?;
        Ok(BallGreenSolver {
            params,
            radii,
            weights,
        })
    }

    /// Apply the Green operator to a radial source given at the grid nodes.
    pub fn apply(&self, source: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(source).map(|(w, s)| w * s).sum())
            .collect()
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    /// Linear interpolation of grid values at an arbitrary radius.
    pub fn interp(&self, values: &[f64], r: f64) -> f64 {
        let r = r.abs();
        match self.radii.binary_search_by(|a| a.partial_cmp(&r).unwrap()) {
            Ok(j) => values[j],
            Err(0) => values[0],
            Err(j) if j >= self.radii.len() => *values.last().unwrap(),
            Err(j) => {
                let (r0, r1) = (self.radii[j - 1], self.radii[j]);
                let t = (r - r0) / (r1 - r0);
                values[j - 1] * (1.0 - t) + values[j] * t
            }
        }
    }
}

/// Rows of the radial Green operator: row i integrates G((r_i, 0), y)
/// against the hat basis in |y|.
fn green_matrix(params: KernelParams, radii: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = radii.len();
    let gauss = GaussRule::legendre(8);
    let mut w = vec![vec![0.0; n]; n];
    for (i, &ri) in radii.iter().enumerate() {
        let x = point2(ri, 0.0);
        // angular average of G at each radius t, graded toward theta = 0
        // where the diagonal singularity sits when t is near ri
        let k_radial = |t: f64| -> f64 {
            if t <= 0.0 {
                return 0.0;
            }
            let near = (t - ri).abs().max(1e-12) / t.max(ri);
            let levels = ((std::f64::consts::PI / (0.05 * near)).log2().ceil() as usize).clamp(6, 40);
            let mut breaks = crate::quad::graded_towards_start(0.0, std::f64::consts::PI, levels, 0.5);
            breaks.insert(0.0_f64.max(0.0) as usize, 0.0);
            let mut acc = 0.0;
            for win in breaks.windows(2) {
                acc += gauss.integrate(win[0], win[1], |th| {
                    let y = point2(t * th.cos(), t * th.sin());
                    ball_green(params, &x, &y).unwrap_or(0.0)
                });
            }
            2.0 * acc * t // both half-circles and the |y|^{N-1} factor (N = 2)
        };
        for j in 0..n {
            let lo = if j == 0 { 0.0 } else { radii[j - 1] };
            let mid = radii[j];
            let hi = if j + 1 < n { radii[j + 1] } else { 1.0 };
            // hat_j weighted integral over [lo, hi]; the last basis function
            // stays at one on the final sliver so the basis sums to one on
            // the whole ball (constant extrapolation past the last node)
            let mut acc = 0.0;
            if mid > lo {
                acc += integrate_with_diag(&gauss, lo, mid, ri, &|t| {
                    k_radial(t) * (t - lo) / (mid - lo)
                });
            }
            if hi > mid {
                if j + 1 < n {
                    acc += integrate_with_diag(&gauss, mid, hi, ri, &|t| {
                        k_radial(t) * (hi - t) / (hi - mid)
                    });
                } else {
                    acc += integrate_with_diag(&gauss, mid, hi, ri, &k_radial);
                }
            }
            w[i][j] = acc;
        }
    }
    Ok(w)
}

/// Integrate over [a, b] with graded panels towards the Green diagonal
/// radius; the angular average behaves like |t - diag|^{2s-1} (log at
/// s = 1/2) there.
fn integrate_with_diag<F: Fn(f64) -> f64>(
    gauss: &GaussRule,
    a: f64,
    b: f64,
    diag: f64,
    f: &F,
) -> f64 {
    if diag > a + 1e-14 && diag < b - 1e-14 {
        crate::quad::integrate_algebraic_end_clamped(gauss, a, diag, 0.0, (diag - a) * 1e-6, |t, _| f(t))
            + crate::quad::integrate_algebraic_start_clamped(gauss, diag, b, 0.0, (b - diag) * 1e-6, |t, _| {
                f(t)
            })
    } else if diag <= a + 1e-14 {
        crate::quad::integrate_algebraic_start_clamped(gauss, a, b, 0.0, (b - a) * 1e-6, |t, _| f(t))
    } else {
        crate::quad::integrate_algebraic_end_clamped(gauss, a, b, 0.0, (b - a) * 1e-6, |t, _| f(t))
    }
}

/// What the linear sub-steps of the iteration run on.
pub enum BallLinearSolver {
    /// Deterministic radial Green quadrature.
    Green(BallGreenSolver),
    /// Walk-on-spheres estimates at the grid nodes of the given solver grid.
    MonteCarlo {
        grid: BallGreenSolver,
        cfg: WalkConfig,
    },
}

impl BallLinearSolver {
    fn grid(&self) -> &BallGreenSolver {
        match self {
            BallLinearSolver::Green(g) => g,
            BallLinearSolver::MonteCarlo { grid, .. } => grid,
        }
    }

    /// Values of int G(x_i, y) source(|y|) dy on the radial grid, and a
    /// standard-error scale (zero for the deterministic route).
    fn apply_source(&self, source: &[f64]) -> Result<(Vec<f64>, f64)> {
        match self {
            BallLinearSolver::Green(g) => Ok((g.apply(source), 0.0)),
            BallLinearSolver::MonteCarlo { grid, cfg } => {
                let params = grid.params();
                let vals = source.to_vec();
                let radii = grid.radii.clone();
                let src = move |x: &Point| {
                    // piecewise-linear radial interpolation of the source
                    let r = norm(x);
                    match radii.binary_search_by(|a| a.partial_cmp(&r).unwrap()) {
                        Ok(j) => vals[j],
                        Err(0) => vals[0],
                        Err(j) if j >= radii.len() => *vals.last().unwrap(),
                        Err(j) => {
                            let (r0, r1) = (radii[j - 1], radii[j]);
                            let t = (r - r0) / (r1 - r0);
                            vals[j - 1] * (1.0 - t) + vals[j] * t
                        }
                    }
                };
                let domain = Domain::unit_ball(|_: &Point| 0.0);
                let mut out = Vec::with_capacity(grid.radii.len());
                let mut max_se = 0.0f64;
                for &r in &grid.radii {
                    let est = wos_estimate(&domain, &src, &point2(r, 0.0), params, cfg)?;
                    out.push(est.mean);
                    max_se = max_se.max(est.stderr);
                }
                Ok((out, max_se))
            }
        }
    }
}

/// Sign convention of the nonlinear source: (-Delta)^s u = sign * f(x, u).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSign {
    Plus,
    Minus,
}

/// Ladder structure of the iteration.
pub enum LadderKind {
    /// Plain Picard iteration at a fixed datum.
    None,
    /// Singular-trace levels E u = k along the constant-free Martin profile.
    TraceLevels(Vec<f64>),
    /// Datum truncations min(g, n).
    DatumTruncations(Vec<f64>),
}

/// Nonlinear source, possibly depending on position (Caratheodory).
pub type Caratheodory = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;

pub struct IterationProblem {
    pub sign: SourceSign,
    pub f: Caratheodory,
    /// Radial exterior datum evaluated on the sphere of radius |y|.
    pub g: Option<ScalarField>,
    pub ladder: LadderKind,
}

impl IterationProblem {
    pub fn from_profile(sign: SourceSign, profile: &NonlinearProfile) -> Self {
        let p = profile.clone();
        IterationProblem {
            sign,
            f: Arc::new(move |_x: &Point, t: f64| if t > 0.0 { p.f(t) } else { 0.0 }),
            g: None,
            ladder: LadderKind::None,
        }
    }
}

/// Report of the iteration at the probe radii.
#[derive(Debug, Clone)]
pub struct IterationReport {
    /// One row per ladder level (or per Picard sweep when no ladder).
    pub iterates: Vec<Vec<f64>>,
    pub monotone: bool,
    /// Supersolution values at the probes, when supplied.
    pub bounded_by: Option<Vec<f64>>,
    /// Monotonicity tolerance actually used (3 stderr for Monte Carlo).
    pub tolerance: f64,
}

/// Run the monotone scheme: each ladder level is solved by Picard iteration
/// with the frozen nonlinearity, u <- harmonic part + sign * G[f(., u)],
/// clipped to the sub/supersolution sandwich; the report carries the probe
/// values per level and whether the provable monotonicity held.
pub fn monotone_iterate(
    problem: &IterationProblem,
    solver: &BallLinearSolver,
    probes: &[f64],
    supersolution: Option<&dyn Fn(f64) -> f64>,
    k_max: usize,
) -> Result<IterationReport> {
    let grid = solver.grid();
    let params = grid.params();
    let radii = grid.radii.clone();
    let quad = QuadConfig::new(0.05, 1024.0);

    // harmonic parts per ladder level
    let levels: Vec<HarmonicPart> = match &problem.ladder {
        LadderKind::None => {
            vec![harmonic_from_datum(params, problem.g.as_ref(), &radii, &quad)?]
        }
        LadderKind::TraceLevels(ks) => {
            let unit: Vec<f64> = radii
                .iter()
                .map(|&r| martin_normalizer(params, &point2(r, 0.0)))
                .collect::<Result<_>>()?;
            ks.iter()
                .map(|&k| HarmonicPart {
                    values: unit.iter().map(|v| k * v).collect(),
                })
                .collect()
        }
        LadderKind::DatumTruncations(ns) => {
            let g = problem.g.as_ref().ok_or_else(|| {
                Error::domain("g", "datum truncations need an exterior datum")
            })?;
            ns.iter()
                .map(|&level| {
                    let capped = cap_scalar_field(g, level);
                    harmonic_from_datum(params, Some(&capped), &radii, &quad)
                })
                .collect::<Result<_>>()?
        }
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut noise = 0.0f64;
    let mut picard_rows: Vec<Vec<f64>> = Vec::new();
    for part in &levels {
        let (converged, level_noise, sweeps) =
            picard_solve(problem, solver, &part.values, k_max)?;
        noise = noise.max(level_noise);
        let at_probes = |vals: &[f64]| -> Vec<f64> {
            probes.iter().map(|&r| grid.interp(vals, r)).collect()
        };
        if matches!(problem.ladder, LadderKind::None) {
            picard_rows = sweeps.iter().map(|v| at_probes(v)).collect();
        }
        rows.push(at_probes(&converged));
    }

    let tolerance = if noise > 0.0 { 3.0 * noise } else { 1e-8 };
    let monotone = match &problem.ladder {
        LadderKind::None => {
            // sign +: sweeps nondecreasing; sign -: all sweeps below the start
            // and the even/odd bracket ordering holds
            let rows = &picard_rows;
            match problem.sign {
                SourceSign::Plus => rows.windows(2).all(|w| {
                    w[0].iter().zip(&w[1]).all(|(a, b)| *b >= *a - tolerance)
                }),
                SourceSign::Minus => {
                    let below_start = rows.iter().skip(1).all(|row| {
                        row.iter().zip(&rows[0]).all(|(v, s)| *v <= *s + tolerance)
                    });
                    let even_decreasing = rows.iter().step_by(2).collect::<Vec<_>>();
                    let even_ok = even_decreasing.windows(2).all(|w| {
                        w[1].iter().zip(w[0].iter()).all(|(b, a)| *b <= *a + tolerance)
                    });
                    below_start && even_ok
                }
            }
        }
        _ => rows.windows(2).all(|w| {
            w[0].iter().zip(&w[1]).all(|(a, b)| *b >= *a - tolerance)
        }),
    };
    if !monotone {
        return Err(Error::scheme_violation(
            "iteration lost the provable monotonicity beyond tolerance; check the configuration",
        ));
    }

    let bounded_by = supersolution.map(|ubar| probes.iter().map(|&r| ubar(r)).collect::<Vec<f64>>());
    if let Some(bound) = &bounded_by {
        if let Some(top) = rows.last() {
            for (v, b) in top.iter().zip(bound) {
                if *v > *b + tolerance {
                    return Err(Error::scheme_violation(format!(
                        "iterate {v} exceeds the supersolution {b} beyond tolerance"
                    )));
                }
            }
        }
    }

    Ok(IterationReport {
        iterates: if matches!(problem.ladder, LadderKind::None) {
            picard_rows
        } else {
            rows
        },
        monotone,
        bounded_by,
        tolerance,
    })
}

struct HarmonicPart {
    values: Vec<f64>,
}

fn harmonic_from_datum(
    params: KernelParams,
    g: Option<&ScalarField>,
    radii: &[f64],
    quad: &QuadConfig,
) -> Result<HarmonicPart> {
    let values = match g {
        None => vec![0.0; radii.len()],
        Some(g) => radii
            .iter()
            .map(|&r| poisson_solve_ball(params, g, &point2(r, 0.0), quad))
            .collect::<Result<_>>()?,
    };
    Ok(HarmonicPart { values })
}

fn cap_scalar_field(g: &ScalarField, level: f64) -> ScalarField {
    let inner = g.clone();
    let mut capped = ScalarField::new(
        move |y: &Point| inner.eval(y).min(level),
        g.c2_radius,
        g.growth,
    );
    capped.singular_spheres = g
        .singular_spheres
        .iter()
        .map(|sp| crate::pv_eval::SingularSphere { radius: sp.radius, exponent: 0.0 })
        .collect();
    capped
}

/// Solve one ladder level. The deterministic route runs the damped scheme
/// (I + W diag(Lambda)) u_{j+1} = harm + W (Lambda u_j - f(u_j)) with
/// Lambda_j = f'(u_j): for convex increasing f this descends monotonically
/// from the supersolution start u_0 = harm and converges fast even when f'
/// is enormous near the boundary. The Monte Carlo route has no Green matrix
/// and runs plain Picard sweeps, which contract for mild nonlinearities.
/// Returns the converged grid values, the Monte Carlo noise scale, and the
/// sweep history on the grid.
fn picard_solve(
    problem: &IterationProblem,
    solver: &BallLinearSolver,
    harm: &[f64],
    k_max: usize,
) -> Result<(Vec<f64>, f64, Vec<Vec<f64>>)> {
    let grid = solver.grid();
    let radii = &grid.radii;
    let scale = harm.iter().fold(1e-12_f64, |a, &b| a.max(b.abs()));
    match (solver, problem.sign) {
        (BallLinearSolver::Green(g), SourceSign::Minus) => {
            let n = radii.len();
            let mut u: Vec<f64> = harm.to_vec();
            let mut sweeps = vec![u.clone()];
            for _ in 0..k_max.max(2) {
                // local slopes of the frozen nonlinearity
                let lambda: Vec<f64> = radii
                    .iter()
                    .zip(&u)
                    .map(|(&r, &ui)| {
                        let x = point2(r, 0.0);
                        let h = (ui.abs() * 1e-6).max(1e-9);
                        (((problem.f)(&x, ui + h) - (problem.f)(&x, ui)) / h).max(0.0)
                    })
                    .collect();
                // A = I + W diag(lambda)
                let mut a = vec![vec![0.0f64; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        a[i][j] = g.weights[i][j] * lambda[j];
                    }
                    a[i][i] += 1.0;
                }
                let rhs: Vec<f64> = (0..n)
                    .map(|i| {
                        let mut acc = harm[i];
                        for j in 0..n {
                            let x = point2(radii[j], 0.0);
                            acc += g.weights[i][j] * (lambda[j] * u[j] - (problem.f)(&x, u[j]));
                        }
                        acc
                    })
                    .collect();
                let mut next = solve_dense(a, rhs)?;
                for (v, h) in next.iter_mut().zip(harm) {
                    *v = v.clamp(0.0, *h);
                }
                let diff = next
                    .iter()
                    .zip(&u)
                    .fold(0.0f64, |acc, (nv, ov)| acc.max((nv - ov).abs()));
                u = next;
                sweeps.push(u.clone());
                if diff < 1e-9 * scale {
                    return Ok((u, 0.0, sweeps));
                }
            }
            let last = &sweeps[sweeps.len() - 1];
            let prev = &sweeps[sweeps.len() - 2];
            let gap = last
                .iter()
                .zip(prev)
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            if gap > 1e-6 * scale {
                return Err(Error::convergence_with(
                    "damped iteration did not settle within the sweep cap",
                    last[0],
                    gap,
                ));
            }
            Ok((u, 0.0, sweeps))
        }
        _ => {
            let mut u: Vec<f64> = harm.to_vec();
            let mut sweeps = vec![u.clone()];
            let mut noise = 0.0f64;
            for sweep in 0..k_max.max(2) {
                let source: Vec<f64> = radii
                    .iter()
                    .zip(&u)
                    .map(|(&r, &ui)| (problem.f)(&point2(r, 0.0), ui))
                    .collect();
                let (gf, se) = solver.apply_source(&source)?;
                noise = noise.max(se);
                let mut next: Vec<f64> = harm
                    .iter()
                    .zip(&gf)
                    .map(|(h, q)| match problem.sign {
                        SourceSign::Plus => h + q,
                        SourceSign::Minus => h - q,
                    })
                    .collect();
                if problem.sign == SourceSign::Minus {
                    // theorem-backed sandwich 0 <= u <= harmonic part
                    for (v, h) in next.iter_mut().zip(harm) {
                        *v = v.clamp(0.0, *h);
                    }
                }
                let diff = next
                    .iter()
                    .zip(&u)
                    .fold(0.0f64, |a, (nv, ov)| a.max((nv - ov).abs()));
                u = next;
                sweeps.push(u.clone());
                if diff < 1e-8 * scale + 3.0 * noise && sweep >= 1 {
                    return Ok((u, noise, sweeps));
                }
            }
            let last = &sweeps[sweeps.len() - 1];
            let prev = &sweeps[sweeps.len() - 2];
            let gap = last
                .iter()
                .zip(prev)
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            if gap > 0.05 * scale + 3.0 * noise {
                return Err(Error::convergence_with(
                    "Picard iteration not contractive within the sweep cap",
                    last[0],
                    gap,
                ));
            }
            Ok((u, noise, sweeps))
        }
    }
}

/// Dense linear solve with partial pivoting; the systems here are tiny.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        if diag.abs() < 1e-300 {
            return Err(Error::convergence("singular damped-iteration matrix"));
        }
        for row in (col + 1)..n {
            let f = a[row][col] / diag;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// u0 for the large-solution ladder: the constant-free Martin profile at a
/// radius, exposed for tests and experiments.
pub fn martin_profile(params: KernelParams, r: f64) -> Result<f64> {
    if params.n == 1 {
        martin_normalizer(params, &point1(r))
    } else {
        martin_normalizer(params, &point2(r, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::ORIGIN;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let ratio = (hi / lo).powf(1.0 / (n as f64 - 1.0));
        (0..n).map(|k| lo * ratio.powi(k as i32)).collect()
    }

    #[test]
    fn power_profile_has_exact_structural_bounds() {
        let p = NonlinearProfile::power(2.5).unwrap();
        let check = profile_check(&p, &log_grid(1e-3, 1e3, 40)).unwrap();
        assert!((check.m_hat - 1.5).abs() < 1e-12);
        assert!((check.big_m_hat - 1.5).abs() < 1e-12);
        assert!(check.ok);
    }

    #[test]
    fn lower_log_profile_ratio_stays_in_declared_band() {
        let s = 0.4;
        let alpha = 0.9;
        let p = NonlinearProfile::lower_log_critical(s, alpha).unwrap();
        let grid = log_grid(1e-3, 1e6, 60);
        let check = profile_check(&p, &grid).unwrap();
        assert!(check.ok, "bounds [{}, {}] outside declared", check.m_hat, check.big_m_hat);
        // the displayed ratio: 1+2s + alpha t / ((1+t) ln(1+t))
        for &t in &grid {
            let ratio = t * p.fprime(t) / p.f(t);
            let want = 1.0 + 2.0 * s + alpha * t / ((1.0 + t) * (1.0 + t).ln());
            assert!((ratio - want).abs() < 1e-9, "ratio at {t}");
        }
    }

    #[test]
    fn exponential_growth_fails_the_check() {
        let p = NonlinearProfile::custom(
            |t| t.exp() - 1.0,
            |t| t.exp(),
            |t| t.exp() - 1.0 - t,
            1.0,
            10.0,
        );
        let check = profile_check(&p, &log_grid(0.1, 100.0, 30)).unwrap();
        assert!(!check.ok, "exponential must violate the finite upper bound");
    }

    #[test]
    fn phi_matches_the_power_closed_form() {
        // f = t^p: phi(u) = 2 sqrt(p+1)/(p-1) u^{(1-p)/2}; at p=3, u=1: 2
        let p = NonlinearProfile::power(3.0).unwrap();
        let got = phi_eval(&p, 1.0).unwrap();
        assert!((got - 2.0).abs() < 1e-9, "phi(1) = {got}");
        for u in [0.5f64, 1.0, 7.0, 100.0] {
            let want = 2.0 * 4.0f64.sqrt() / 2.0 * u.powf(-1.0);
            let got = phi_eval(&p, u).unwrap();
            assert!((got / want - 1.0).abs() < 1e-9, "phi({u}) = {got} want {want}");
        }
    }

    #[test]
    fn phi_is_decreasing_and_equivalent_to_sqrt_u_over_f() {
        let s = 0.3;
        let p = NonlinearProfile::lower_log_critical(s, 1.2).unwrap();
        let mut prev = f64::INFINITY;
        for &u in &[1.0, 2.0, 8.0, 50.0, 1000.0] {
            let v = phi_eval(&p, u).unwrap();
            assert!(v < prev, "phi not decreasing at {u}");
            prev = v;
            let compare = (u / p.f(u)).sqrt();
            let ratio = v / compare;
            // phi(u) =~ sqrt(u/f(u)) with constants controlled by (m, M)
            assert!(
                ratio > 0.5 * (p.m).sqrt().min(1.0) && ratio < 4.0 / p.m.sqrt().min(1.0),
                "equivalence bracket violated at {u}: ratio {ratio}"
            );
        }
    }

    #[test]
    fn psi_round_trips_phi() {
        let p = NonlinearProfile::power(2.2).unwrap();
        for &u in &[0.5, 1.0, 100.0] {
            let v = phi_eval(&p, u).unwrap();
            let back = psi_eval(&p, v).unwrap();
            assert!((back / u - 1.0).abs() < 1e-8, "round trip at {u}: {back}");
        }
        // 20-point log grid round trip
        for &u in log_grid(0.1, 1e3, 20).iter() {
            let v = phi_eval(&p, u).unwrap();
            let back = psi_eval(&p, v).unwrap();
            assert!((back / u - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn psi_matches_power_closed_form_and_scaling_bound() {
        let pw = 3.0;
        let p = NonlinearProfile::power(pw).unwrap();
        for &v in &[0.1, 1.0, 10.0] {
            let want = ((pw - 1.0) * v / (2.0 * (pw + 1.0).sqrt())).powf(2.0 / (1.0 - pw));
            let got = psi_eval(&p, v).unwrap();
            assert!((got / want - 1.0).abs() < 1e-8, "psi({v}) = {got} want {want}");
        }
        // psi(c v) <= c^{-2/M} psi(v) for c in (0,1)
        for &c in &[0.2, 0.5, 0.9] {
            for &v in &[0.5, 2.0] {
                let lhs = psi_eval(&p, c * v).unwrap();
                let rhs = c.powf(-2.0 / p.big_m) * psi_eval(&p, v).unwrap();
                assert!(lhs <= rhs * (1.0 + 1e-8), "monotone scaling at c={c}, v={v}");
            }
        }
    }

    #[test]
    fn classification_matches_the_power_family() {
        let s = 0.5;
        for (pw, l1, e) in [
            (2.2, KoFlag::True, KoFlag::True),   // p > 1+2s = 2, p < 3
            (1.8, KoFlag::False, KoFlag::True),  // below the L1 threshold
            (3.2, KoFlag::True, KoFlag::False),  // above the E threshold
        ] {
            let p = NonlinearProfile::power(pw).unwrap();
            let c = ko_classify(&p, s).unwrap();
            assert_eq!(c.ko, KoFlag::True, "KO at p={pw}");
            assert_eq!(c.l1, l1, "L1 at p={pw}");
            assert_eq!(c.e, e, "E at p={pw}");
        }
    }

    #[test]
    fn classification_matches_the_log_families() {
        let s = 0.5;
        for (alpha, l1) in [(2.0 * s + 0.5, KoFlag::True), (2.0 * s - 0.5, KoFlag::False)] {
            let p = NonlinearProfile::lower_log_critical(s, alpha).unwrap();
            let c = ko_classify(&p, s).unwrap();
            assert_eq!(c.l1, l1, "lower-log L1 at alpha={alpha}");
            assert_eq!(c.e, KoFlag::True);
        }
        for (beta, e) in [(1.5, KoFlag::True), (0.5, KoFlag::False)] {
            let p = NonlinearProfile::upper_log_critical(s, beta).unwrap();
            let c = ko_classify(&p, s).unwrap();
            assert_eq!(c.l1, KoFlag::True, "upper-log L1 at beta={beta}");
            assert_eq!(c.e, e, "upper-log E at beta={beta}");
        }
    }

    #[test]
    fn custom_profiles_classify_by_tail_fitting_with_dead_zone() {
        let s = 0.5;
        // plain power masquerading as custom: thresholds 0.2 away resolve
        let p = NonlinearProfile::custom(
            |t| t.powf(2.2),
            |t| 2.2 * t.powf(1.2),
            |t| t.powf(3.2) / 3.2,
            1.2,
            1.2,
        );
        let c = ko_classify(&p, s).unwrap();
        assert_eq!(c.l1, KoFlag::True);
        assert_eq!(c.e, KoFlag::True);
        // exactly at the L1 threshold the integrand slope is -1: dead zone
        let p = NonlinearProfile::custom(
            |t| t.powf(2.0),
            |t| 2.0 * t,
            |t| t.powf(3.0) / 3.0,
            1.0,
            1.0,
        );
        let c = ko_classify(&p, s).unwrap();
        assert_eq!(c.l1, KoFlag::Undecided, "threshold case must be undecided");
    }

    #[test]
    fn power_ranges_are_exact() {
        let (lo, hi) = power_range(0.5, OperatorKind::Restricted).unwrap();
        assert_eq!((lo, hi), (2.0, 3.0));
        let (lo, hi) = power_range(0.5, OperatorKind::Spectral).unwrap();
        assert_eq!((lo, hi), (1.5, 2.0));
        // s -> 1: restricted lower endpoint approaches 3
        let (lo, _) = power_range(0.999, OperatorKind::Restricted).unwrap();
        assert!((lo - 2.998).abs() < 1e-12);
    }

    #[test]
    fn supersolution_requires_the_l1_condition() {
        let s = 0.5;
        let bad = NonlinearProfile::power(1.0 + 2.0 * s - 0.2).unwrap();
        let err = supersolution_value(
            &bad,
            s,
            &point2(0.5, 0.0),
            SupersolutionScale { mu: 1.0, lambda: 1.0 },
        );
        assert!(matches!(err, Err(Error::KoViolation { .. })));
        let good = NonlinearProfile::power(2.5).unwrap();
        let v = supersolution_value(
            &good,
            s,
            &point2(0.5, 0.0),
            SupersolutionScale { mu: 1.0, lambda: 1.0 },
        )
        .unwrap();
        assert!(v > 0.0);
    }

    #[test]
    fn supersolution_boundary_rate_matches_minus_two_s_over_p_minus_one() {
        let s = 0.5;
        let pw = 2.5;
        let p = NonlinearProfile::power(pw).unwrap();
        let mut pts = Vec::new();
        for &d in &[0.1f64, 0.05, 0.02, 0.01, 0.005, 0.002] {
            let v = psi_eval(&p, d.powf(s)).unwrap();
            pts.push((d.ln(), v.ln()));
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|q| q.0).sum();
        let sy: f64 = pts.iter().map(|q| q.1).sum();
        let sxx: f64 = pts.iter().map(|q| q.0 * q.0).sum();
        let sxy: f64 = pts.iter().map(|q| q.0 * q.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let want = -2.0 * s / (pw - 1.0);
        assert!((slope - want).abs() < 0.05, "rate {slope} want {want}");
    }

    #[test]
    fn ball_green_reproduces_torsion_identity() {
        // int_B G(x, y) dy = torsion(x): dual route for the closed form.
        // Polar around x itself: G ~ rho^{2s-2} at the pole and vanishes like
        // dist^s at the sphere crossing.
        let params = KernelParams::new(2, 0.4).unwrap();
        let gauss = GaussRule::legendre(12);
        let dirs = crate::quad::sphere_rule(2, 256);
        for &xr in &[0.0, 0.35, 0.7] {
            let x = point2(xr, 0.0);
            let mut total = 0.0;
            for (omega, w) in &dirs {
                let b = crate::geom::dot(&x, omega);
                let rho_max = -b + (b * b + 1.0 - xr * xr).sqrt();
                let radial = crate::quad::integrate_algebraic_start(
                    &gauss,
                    0.0,
                    rho_max * 0.5,
                    (1.0 - 2.0 * params.s).max(0.0),
                    45,
                    |rho, _| {
                        let y = crate::geom::axpy(&x, rho, omega);
                        ball_green(params, &x, &y).unwrap_or(0.0) * rho
                    },
                ) + crate::quad::integrate_algebraic_end_clamped(
                    &gauss,
                    rho_max * 0.5,
                    rho_max,
                    0.0,
                    rho_max * 1e-9,
                    |rho, _| {
                        let y = crate::geom::axpy(&x, rho, omega);
                        ball_green(params, &x, &y).unwrap_or(0.0) * rho
                    },
                );
                total += w * radial;
            }
            let want = torsion_ball(params, &BallGeometry::unit(), &x);
            assert!(
                (total / want - 1.0).abs() < 1e-3,
                "at |x| = {xr}: {total} want {want}"
            );
        }
    }

    #[test]
    fn green_solver_matches_torsion_and_wos() {
        let params = KernelParams::new(2, 0.5).unwrap();
        let solver = BallGreenSolver::new(params, 12, 1e-3).unwrap();
        let ones = vec![1.0; solver.radii.len()];
        let torsion_vals = solver.apply(&ones);
        for (&r, &v) in solver.radii.iter().zip(&torsion_vals) {
            let want = torsion_ball(params, &BallGeometry::unit(), &point2(r, 0.0));
            assert!(
                (v - want).abs() < 2e-3 * want.max(0.05),
                "torsion at r={r}: {v} want {want}"
            );
        }
        // independent Monte Carlo oracle on a non-constant radial source;
        // small kappa keeps the center-scoring bias (O(kappa^2) for smooth f)
        // inside the allowance
        let src = |x: &Point| 1.0 + crate::geom::norm2(x);
        let source: Vec<f64> = solver.radii.iter().map(|&r| 1.0 + r * r).collect();
        let vals = solver.apply(&source);
        let domain = Domain::unit_ball(|_: &Point| 0.0);
        let mut cfg = WalkConfig::new(40_000, 3);
        cfg.radius_fraction = 0.15;
        let est = wos_estimate(&domain, &src, &ORIGIN, params, &cfg).unwrap();
        let quad_at_zero = solver.interp(&vals, 0.0);
        assert!(
            (quad_at_zero - est.mean).abs() < 3.0 * est.stderr + 5e-3,
            "green {quad_at_zero} vs wos {} +- {}",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn bounded_datum_iteration_decreases_from_the_harmonic_start() {
        // sign -, f = u^2, g = 1: iterates fall below the start and stay in [0,1]
        let params = KernelParams::new(2, 0.5).unwrap();
        let solver = BallLinearSolver::Green(BallGreenSolver::new(params, 12, 1e-3).unwrap());
        let g = ScalarField::new(
            |_: &Point| 1.0,
            1.0,
            crate::pv_eval::GrowthClass::Bounded { bound: 1.0 },
        );
        let problem = IterationProblem {
            sign: SourceSign::Minus,
            f: Arc::new(|_: &Point, t: f64| if t > 0.0 { t * t } else { 0.0 }),
            g: Some(g),
            ladder: LadderKind::None,
        };
        let probes = [0.0, 0.3, 0.6];
        let report = monotone_iterate(&problem, &solver, &probes, None, 60).unwrap();
        assert!(report.monotone);
        let start = &report.iterates[0];
        for row in report.iterates.iter().skip(1) {
            for (v, s0) in row.iter().zip(start) {
                assert!(*v <= s0 + report.tolerance, "iterate above start");
                assert!(*v >= -report.tolerance && *v <= 1.0 + report.tolerance);
            }
        }
        // strict decrease happened at the first step
        assert!(report.iterates[1][0] < report.iterates[0][0]);
    }

    #[test]
    fn trace_ladder_is_monotone_and_bounded_by_the_supersolution() {
        let s = 0.5;
        let params = KernelParams::new(2, s).unwrap();
        let pw = 2.5; // inside the restricted range (2, 3)
        let profile = NonlinearProfile::power(pw).unwrap();
        let solver = BallLinearSolver::Green(BallGreenSolver::new(params, 10, 1e-3).unwrap());
        let prof = profile.clone();
        let problem = IterationProblem {
            sign: SourceSign::Minus,
            f: Arc::new(move |_: &Point, t: f64| if t > 0.0 { prof.f(t) } else { 0.0 }),
            g: None,
            ladder: LadderKind::TraceLevels(vec![1.0, 2.0, 3.0, 4.0, 5.0]),
        };
        let probes = [0.2, 0.5, 0.8];
        // empirical scale: mu, lambda large enough to dominate on the grid
        let sup_profile = profile.clone();
        let supersolution = move |r: f64| {
            let x = point2(r, 0.0);
            supersolution_value(
                &sup_profile,
                s,
                &x,
                SupersolutionScale { mu: 8.0, lambda: 40.0 },
            )
            .unwrap()
        };
        let report = monotone_iterate(&problem, &solver, &probes, Some(&supersolution), 120).unwrap();
        assert!(report.monotone);
        assert_eq!(report.iterates.len(), 5);
        for w in report.iterates.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                assert!(*b >= *a - report.tolerance, "ladder not nondecreasing");
            }
        }
    }

    #[test]
    fn degenerate_zero_nonlinearity_fixes_after_one_sweep() {
        let params = KernelParams::new(2, 0.4).unwrap();
        let solver = BallLinearSolver::Green(BallGreenSolver::new(params, 10, 1e-2).unwrap());
        let g = ScalarField::new(
            |_: &Point| 0.7,
            1.0,
            crate::pv_eval::GrowthClass::Bounded { bound: 0.7 },
        );
        let problem = IterationProblem {
            sign: SourceSign::Minus,
            f: Arc::new(|_: &Point, _t: f64| 0.0),
            g: Some(g),
            ladder: LadderKind::None,
        };
        let report = monotone_iterate(&problem, &solver, &[0.0, 0.4], None, 30).unwrap();
        let first = &report.iterates[1];
        let last = report.iterates.last().unwrap();
        for (a, b) in first.iter().zip(last) {
            assert!((a - b).abs() < 1e-12, "linear problem moved after step 1");
        }
    }

    #[test]
    fn collar_bound_phi_of_ladder_top_dominates_delta_to_s() {
        // phi(u_k) >= c delta^s near the boundary: fitted exponent >= s - 0.05
        let s = 0.5;
        let params = KernelParams::new(2, s).unwrap();
        let profile = NonlinearProfile::power(2.5).unwrap();
        let solver = BallLinearSolver::Green(BallGreenSolver::new(params, 10, 1e-4).unwrap());
        let prof = profile.clone();
        let problem = IterationProblem {
            sign: SourceSign::Minus,
            f: Arc::new(move |_: &Point, t: f64| if t > 0.0 { prof.f(t) } else { 0.0 }),
            g: None,
            ladder: LadderKind::TraceLevels(vec![5.0]),
        };
        let deltas = [0.05, 0.03, 0.02, 0.012, 0.007, 0.004];
        let probes: Vec<f64> = deltas.iter().map(|d| 1.0 - d).collect();
        let report = monotone_iterate(&problem, &solver, &probes, None, 120).unwrap();
        let top = report.iterates.last().unwrap();
        let mut pts = Vec::new();
        for (&d, &u) in deltas.iter().zip(top) {
            pts.push((d.ln(), phi_eval(&profile, u).unwrap().ln()));
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|q| q.0).sum();
        let sy: f64 = pts.iter().map(|q| q.1).sum();
        let sxx: f64 = pts.iter().map(|q| q.0 * q.0).sum();
        let sxy: f64 = pts.iter().map(|q| q.0 * q.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope >= s - 0.05, "phi(u) exponent {slope} below s - 0.05");
    }
}
