//! Boundary-exponent estimation: log-log least squares with an optional
//! logarithmic factor, and the canned experiments that reproduce the
//! boundary-behaviour table for right-hand sides and exterior data blowing
//! up at the sphere.

use crate::error::{Error, Result};
use crate::geom::{norm, point1, point2, Point};
use crate::kernels::KernelParams;
use crate::pv_eval::{GrowthClass, QuadConfig, ScalarField, SingularSphere};
use crate::wos::{wos_field, Domain, WalkConfig};

/// Result of a boundary-rate fit: value ~ C delta^exponent, optionally with
/// an extra log(1/delta) factor.
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub exponent: f64,
    pub log_factor: bool,
    pub r2: f64,
    pub window: (f64, f64),
}

/// Joint selection rule for the log-augmented model: it must improve r2 by
/// LOG_MODEL_MARGIN and fit a log coefficient above LOG_COEFF_THRESHOLD.
/// Calibrated on the three reference experiments: genuine log factors sit at
/// (dr2, b) ~ (5e-3..5e-1, 0.53..1.0) on the windows used, while subleading
/// power corrections reach either a large dr2 with b <= 0.38 or b near 0.49
/// with dr2 <= 1.5e-4, never both.
const LOG_MODEL_MARGIN: f64 = 2e-3;
const LOG_COEFF_THRESHOLD: f64 = 0.45;

/// Both competing fits, for threshold diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct FitDiagnostics {
    pub plain_slope: f64,
    pub plain_r2: f64,
    pub log_slope: f64,
    pub log_coeff: f64,
    pub log_r2: f64,
}

/// Least-squares fit of log(value) against log(delta), and optionally
/// log log(1/delta); picks the model with meaningfully higher r2.
pub fn fit_rate(samples: &[(f64, f64)], allow_log: bool) -> Result<RateFit> {
    fit_rate_detailed(samples, allow_log).map(|(fit, _)| fit)
}

/// As [`fit_rate`], also returning both models' statistics.
pub fn fit_rate_detailed(
    samples: &[(f64, f64)],
    allow_log: bool,
) -> Result<(RateFit, FitDiagnostics)> {
    if samples.len() < 6 {
        return Err(Error::domain("samples", "need at least 6 samples"));
    }
    let mut window = (f64::INFINITY, 0.0f64);
    for &(d, v) in samples {
        if v <= 0.0 {
            return Err(Error::domain("samples", format!("nonpositive value {v} at delta {d}")));
        }
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::domain("samples", format!("delta {d} outside (0,1)")));
        }
        window.0 = window.0.min(d);
        window.1 = window.1.max(d);
    }

    let xs: Vec<f64> = samples.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|p| p.1.ln()).collect();
    let (plain_slope, plain_r2) = fit_two(&xs, &ys);
    let zs: Vec<f64> = samples.iter().map(|p| (1.0 / p.0).ln().ln()).collect();
    let (log_slope, log_coeff, log_r2) = fit_three(&xs, &zs, &ys);
    let diag = FitDiagnostics {
        plain_slope,
        plain_r2,
        log_slope,
        log_coeff,
        log_r2,
    };
    let pick_log =
        allow_log && log_r2 > plain_r2 + LOG_MODEL_MARGIN && log_coeff > LOG_COEFF_THRESHOLD;
    let fit = if pick_log {
        RateFit {
            exponent: log_slope,
            log_factor: true,
            r2: log_r2,
            window,
        }
    } else {
        RateFit {
            exponent: plain_slope,
            log_factor: false,
            r2: plain_r2,
            window,
        }
    };
    Ok((fit, diag))
}

/// y = a + b x, returning (b, r2).
fn fit_two(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, r_squared(ys, |i| intercept + slope * xs[i]))
}

/// y = a + b x + c z by normal equations, returning (b, c, r2).
fn fit_three(xs: &[f64], zs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len();
    // normal matrix for [1, x, z]
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for i in 0..n {
        let row = [1.0, xs[i], zs[i]];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += row[a] * row[b];
            }
            rhs[a] += row[a] * ys[i];
        }
    }
    let sol = solve3(m, rhs);
    (sol[1], sol[2], r_squared(ys, |i| sol[0] + sol[1] * xs[i] + sol[2] * zs[i]))
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        b.swap(col, pivot);
        let diag = m[col][col];
        for row in (col + 1)..3 {
            let f = m[row][col] / diag;
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in (row + 1)..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}

fn r_squared<F: Fn(usize) -> f64>(ys: &[f64], pred: F) -> f64 {
    let n = ys.len();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (y - pred(i)) * (y - pred(i)))
        .sum();
    if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Which boundary-rate experiment to run on the unit ball.
#[derive(Debug, Clone, Copy)]
pub enum RateMode {
    /// f = delta^{-beta} inside, g = 0; admissible for 0 < beta < 1+s.
    /// Expected exponent: s for beta < s, s with a log factor at beta = s,
    /// and 2s - beta for s < beta < 1+s.
    Rhs { beta: f64 },
    /// g = delta^{-beta} outside, f = 0; admissible for 0 < beta < 1-s.
    /// Expected exponent: -beta.
    Datum { beta: f64 },
}

/// The solver evaluating u along the radial grid.
#[derive(Debug, Clone)]
pub enum SolverHandle {
    /// Walk-on-spheres Monte Carlo; required for interior right-hand sides.
    WalkOnSpheres(WalkConfig),
    /// Deterministic Poisson quadrature; datum mode only.
    BallQuadrature(QuadConfig),
}

/// Default radial grid: 10 points, geometric from 0.2 down to 0.002. Closer
/// approach is dominated by solver error near the sphere.
pub fn default_delta_grid() -> Vec<f64> {
    let ratio = (0.002f64 / 0.2).powf(1.0 / 9.0);
    (0..10).map(|k| 0.2 * ratio.powi(k)).collect()
}

/// Run the designated solver along a radial delta-grid and fit the rate.
/// The interior source is clipped at delta_min/4; see
/// [`rate_experiment_with_clip`] to override that.
pub fn rate_experiment(
    mode: RateMode,
    params: KernelParams,
    solver: &SolverHandle,
    deltas: &[f64],
) -> Result<RateFit> {
    rate_experiment_with_clip(mode, params, solver, deltas, None)
}

/// As [`rate_experiment`], with an explicit clip depth for the interior
/// source. The default grid_min/4 keeps the clipped-mass bias below the fit
/// tolerance on the shallow default window, but deep windows amplify the
/// boundary-layer bias like delta^{s-1} and need a much deeper clip; for
/// beta <= 2s the per-step scores stay bounded, so clipping arbitrarily deep
/// costs no variance.
pub fn rate_experiment_with_clip(
    mode: RateMode,
    params: KernelParams,
    solver: &SolverHandle,
    deltas: &[f64],
    clip: Option<f64>,
) -> Result<RateFit> {
    let samples = rate_samples(mode, params, solver, deltas, clip)?;
    fit_rate(&samples, true)
}

/// The raw (delta, value) samples of a rate experiment.
pub fn rate_samples(
    mode: RateMode,
    params: KernelParams,
    solver: &SolverHandle,
    deltas: &[f64],
    clip: Option<f64>,
) -> Result<Vec<(f64, f64)>> {
    KernelParams::new(params.n, params.s)?;
    let s = params.s;
    let min_delta = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    if !min_delta.is_finite() || deltas.len() < 6 {
        return Err(Error::domain("deltas", "need at least 6 grid points"));
    }
    let values: Vec<f64> = match mode {
        RateMode::Rhs { beta } => {
            if !(beta > 0.0 && beta < 1.0 + s) {
                return Err(Error::domain("beta", format!("rhs mode needs beta in (0, 1+s), got {beta}")));
            }
            let SolverHandle::WalkOnSpheres(cfg) = solver else {
                return Err(Error::domain(
                    "solver",
                    "interior right-hand sides need the Monte Carlo handle",
                ));
            };
            let clip = clip.unwrap_or(min_delta / 4.0);
            if clip <= 0.0 {
                return Err(Error::domain("clip", "clip depth must be positive"));
            }
            let source = move |x: &Point| (1.0 - norm(x)).max(clip).powf(-beta);
            let domain = Domain::unit_ball(|_: &Point| 0.0);
            let grid: Vec<Point> = deltas.iter().map(|&d| start_point(params.n, d)).collect();
            wos_field(&domain, &source, &grid, params, cfg)?
                .iter()
                .map(|e| e.mean)
                .collect()
        }
        RateMode::Datum { beta } => {
            if !(beta > 0.0 && beta < 1.0 - s) {
                return Err(Error::domain("beta", format!("datum mode needs beta in (0, 1-s), got {beta}")));
            }
            let g = ScalarField::new(
                move |y: &Point| {
                    let d = norm(y) - 1.0;
                    if d <= 0.0 {
                        0.0
                    } else {
                        d.powf(-beta)
                    }
                },
                0.2,
                GrowthClass::IntegrableAgainstKernel,
            )
            .with_singular_spheres(vec![SingularSphere { radius: 1.0, exponent: beta }]);
            match solver {
                SolverHandle::BallQuadrature(q) => deltas
                    .iter()
                    .map(|&d| {
                        crate::ball_solver::poisson_solve_ball(
                            params,
                            &g,
                            &start_point(params.n, d),
                            q,
                        )
                    })
                    .collect::<Result<Vec<f64>>>()?,
                SolverHandle::WalkOnSpheres(cfg) => {
                    let gd = move |y: &Point| {
                        let d = norm(y) - 1.0;
                        if d <= 0.0 {
                            0.0
                        } else {
                            d.powf(-beta)
                        }
                    };
                    let domain = Domain::unit_ball(gd);
                    let grid: Vec<Point> =
                        deltas.iter().map(|&d| start_point(params.n, d)).collect();
                    wos_field(&domain, &|_: &Point| 0.0, &grid, params, cfg)?
                        .iter()
                        .map(|e| e.mean)
                        .collect()
                }
            }
        }
    };
    Ok(deltas.iter().cloned().zip(values).collect())
}

fn start_point(n: usize, delta: f64) -> Point {
    if n == 1 {
        point1(1.0 - delta)
    } else {
        point2(1.0 - delta, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric_grid(hi: f64, lo: f64, n: usize) -> Vec<f64> {
        let ratio = (lo / hi).powf(1.0 / (n as f64 - 1.0));
        (0..n).map(|k| hi * ratio.powi(k as i32)).collect()
    }

    #[test]
    fn exact_power_is_recovered_without_log() {
        let samples: Vec<(f64, f64)> = geometric_grid(0.2, 0.002, 10)
            .iter()
            .map(|&d| (d, d.powf(0.3)))
            .collect();
        let fit = fit_rate(&samples, true).unwrap();
        assert!((fit.exponent - 0.3).abs() < 1e-10);
        assert!(!fit.log_factor);
        assert!(fit.r2 >= 0.9999);
    }

    #[test]
    fn log_factor_is_detected_with_correct_power() {
        let samples: Vec<(f64, f64)> = geometric_grid(0.2, 0.002, 10)
            .iter()
            .map(|&d| (d, d.powf(0.5) * (1.0 / d).ln()))
            .collect();
        let fit = fit_rate(&samples, true).unwrap();
        assert!(fit.log_factor, "log factor missed");
        assert!((fit.exponent - 0.5).abs() < 0.02, "exponent {}", fit.exponent);
        // with the log disabled the plain model must still be reported
        let fit = fit_rate(&samples, false).unwrap();
        assert!(!fit.log_factor);
    }

    #[test]
    fn multiplicative_noise_keeps_the_exponent() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let samples: Vec<(f64, f64)> = geometric_grid(0.2, 0.002, 10)
            .iter()
            .map(|&d| (d, d.powf(-0.4) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0))))
            .collect();
        let fit = fit_rate(&samples, true).unwrap();
        assert!((fit.exponent + 0.4).abs() < 0.05, "exponent {}", fit.exponent);
        assert!(!fit.log_factor, "noise must not trigger the log factor");
    }

    #[test]
    fn rejects_bad_samples() {
        let short = vec![(0.1, 1.0); 5];
        assert!(fit_rate(&short, true).is_err());
        let negative: Vec<(f64, f64)> = (1..8).map(|k| (0.1 / k as f64, -1.0)).collect();
        assert!(fit_rate(&negative, true).is_err());
    }

    #[test]
    fn datum_mode_recovers_minus_beta() {
        let p = KernelParams::new(2, 0.4).unwrap();
        let handle = SolverHandle::BallQuadrature(QuadConfig::new(0.1, 1024.0));
        for beta in [0.1, (1.0 - 0.4) / 2.0] {
            let fit = rate_experiment(
                RateMode::Datum { beta },
                p,
                &handle,
                &geometric_grid(0.2, 0.002, 10),
            )
            .unwrap();
            assert!(
                (fit.exponent + beta).abs() < 0.05,
                "beta {beta}: exponent {} want {}",
                fit.exponent,
                -beta
            );
        }
    }

    #[test]
    fn datum_mode_is_stable_under_grid_refinement() {
        let p = KernelParams::new(2, 0.4).unwrap();
        let handle = SolverHandle::BallQuadrature(QuadConfig::new(0.1, 1024.0));
        let coarse = rate_experiment(
            RateMode::Datum { beta: 0.25 },
            p,
            &handle,
            &geometric_grid(0.2, 0.002, 10),
        )
        .unwrap();
        let fine = rate_experiment(
            RateMode::Datum { beta: 0.25 },
            p,
            &handle,
            &geometric_grid(0.2, 0.002, 20),
        )
        .unwrap();
        assert!(
            (coarse.exponent - fine.exponent).abs() < 0.02,
            "refinement moved the exponent: {} -> {}",
            coarse.exponent,
            fine.exponent
        );
    }

    #[test]
    fn rhs_mode_subcritical_beta_gives_torsion_rate() {
        // fitted on a deep window where the subleading delta^{2s-beta} term
        // has died off; the shallow default window biases the slope by ~0.08
        // even for the exact solution
        let p = KernelParams::new(2, 0.4).unwrap();
        let mut cfg = WalkConfig::new(100_000, 515);
        cfg.max_steps = 4000;
        let handle = SolverHandle::WalkOnSpheres(cfg);
        let fit = rate_experiment_with_clip(
            RateMode::Rhs { beta: 0.2 },
            p,
            &handle,
            &geometric_grid(2e-3, 2e-5, 10),
            Some(1e-9),
        )
        .unwrap();
        assert!(
            (fit.exponent - 0.4).abs() < 0.05,
            "exponent {} want s = 0.4",
            fit.exponent
        );
        assert!(!fit.log_factor);
    }

    #[test]
    fn rhs_mode_rejects_quadrature_handle_and_bad_beta() {
        let p = KernelParams::new(2, 0.4).unwrap();
        let handle = SolverHandle::BallQuadrature(QuadConfig::new(0.1, 64.0));
        assert!(rate_experiment(
            RateMode::Rhs { beta: 0.2 },
            p,
            &handle,
            &default_delta_grid()
        )
        .is_err());
        let mc = SolverHandle::WalkOnSpheres(WalkConfig::new(100, 0));
        assert!(rate_experiment(RateMode::Rhs { beta: 1.5 }, p, &mc, &default_delta_grid()).is_err());
        assert!(
            rate_experiment(RateMode::Datum { beta: 0.7 }, p, &mc, &default_delta_grid()).is_err()
        );
    }
}
