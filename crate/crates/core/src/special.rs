//! Gamma, incomplete gamma/beta and error functions.
//!
//! Every closed-form constant in this crate funnels through these routines,
//! so they target relative accuracy ~1e-12 over the argument ranges the
//! solvers actually use (parameters in (0,1), dimensions up to a few).
//! Accuracy is pinned by tests against high-precision reference values.

use crate::error::{Error, Result};

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_ITER: usize = 400;

/// Natural log of the Gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma: x must be positive, got {x}");
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Gamma function for x > 0.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// ln Beta(a, b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    if a <= 0.0 {
        return Err(Error::domain("a", "gamma_p requires a > 0"));
    }
    if x < 0.0 {
        return Err(Error::domain("x", "gamma_p requires x >= 0"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        Ok(1.0 - gamma_q_cf(a, x)?)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    if a <= 0.0 {
        return Err(Error::domain("a", "gamma_q requires a > 0"));
    }
    if x < 0.0 {
        return Err(Error::domain("x", "gamma_q requires x >= 0"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok(1.0 - gamma_p_series(a, x)?)
    } else {
        gamma_q_cf(a, x)
    }
}

/// Series for P(a,x), efficient for x < a+1.
fn gamma_p_series(a: f64, x: f64) -> Result<f64> {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 4e-16 {
            let ln_pre = a * x.ln() - x - ln_gamma(a);
            return Ok(sum * ln_pre.exp());
        }
    }
    Err(Error::convergence("incomplete gamma series stalled"))
}

/// Continued fraction for Q(a,x) (modified Lentz), efficient for x >= a+1.
fn gamma_q_cf(a: f64, x: f64) -> Result<f64> {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 4e-16 {
            let ln_pre = a * x.ln() - x - ln_gamma(a);
            return Ok(ln_pre.exp() * h);
        }
    }
    Err(Error::convergence("incomplete gamma continued fraction stalled"))
}

/// Unregularized upper incomplete gamma Gamma(a, x) for a in (-1, 1], x > 0.
///
/// Negative orders come from the t^{-1-s} subordination integrals and are
/// reduced by one step of the recurrence Gamma(a,x) = (Gamma(a+1,x) - x^a e^{-x}) / a.
pub fn gamma_upper(a: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::domain("x", "gamma_upper requires x > 0"));
    }
    if a > 0.0 {
        Ok(gamma_q(a, x)? * gamma(a))
    } else if a == 0.0 {
        Err(Error::domain("a", "gamma_upper is not defined at a = 0 here"))
    } else {
        let g1 = gamma_upper(a + 1.0, x)?;
        Ok((g1 - x.powf(a) * (-x).exp()) / a)
    }
}

/// Error function, via the regularized incomplete gamma.
pub fn erf(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x.abs() > 9.0 {
        // |erf| - 1 is below 1e-36 there
        return x.signum();
    }
    let p = gamma_p(0.5, x * x).expect("gamma_p(1/2, x^2) cannot fail for finite x");
    if x > 0.0 {
        p
    } else {
        -p
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x > 27.0 {
        return 0.0;
    }
    if x >= 0.0 {
        gamma_q(0.5, x * x).expect("gamma_q(1/2, x^2) cannot fail for finite x")
    } else {
        2.0 - erfc(-x)
    }
}

/// Regularized incomplete beta I_x(a, b), a, b > 0, 0 <= x <= 1.
///
/// Continued fraction (modified Lentz) with the usual symmetry switch at
/// x = (a+1)/(a+b+2) for convergence.
pub fn beta_inc(a: f64, b: f64, x: f64) -> Result<f64> {
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::domain("a,b", "beta_inc requires a, b > 0"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("x", "beta_inc requires 0 <= x <= 1"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - beta_inc_cf(b, a, 1.0 - x)?)
    } else {
        beta_inc_cf(a, b, x)
    }
}

fn beta_inc_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let tiny = 1e-300;
    let ln_pre = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    let prefix = ln_pre.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 4e-16 {
            return Ok(prefix * h);
        }
    }
    Err(Error::convergence("incomplete beta continued fraction stalled"))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with mpmath at 40 significant digits.
    const GAMMA_REF: [(f64, f64, f64); 20] = [
        (0.05, 19.470085311255512864, 2.9688792010517308254),
        (0.1, 9.5135076986687318363, 2.2527126517342059599),
        (0.25, 3.6256099082219083119, 1.2880225246980774574),
        (0.3, 2.9915689876875906283, 1.0957979948180755217),
        (0.5, 1.7724538509055160273, 0.57236494292470008707),
        (0.7, 1.2980553326475577857, 0.26086724653166651439),
        (0.75, 1.2254167024651776451, 0.20328095143129537148),
        (0.9, 1.0686287021193193549, 0.066376239734742971189),
        (0.95, 1.0314533171290321962, 0.030968795237972897041),
        (1.0, 1.0, 0.0),
        (1.3, 0.89747069630627718849, -0.10817480950786047095),
        (1.5, 0.88622692545275801365, -0.12078223763524522235),
        (1.75, 0.91906252684888323385, -0.084401121020485555958),
        (2.0, 1.0, 0.0),
        (2.5, 1.3293403881791370205, 0.28468287047291915963),
        (3.0, 2.0, 0.69314718055994530942),
        (3.5, 3.3233509704478425512, 1.2009736023470742248),
        (4.2, 7.7566895357931776387, 2.048555636960589809),
        (7.5, 1871.2543057977883465, 7.5343642367587329552),
        (12.0, 39916800.0, 17.502307845873885839),
    ];

    const BETA_INC_REF: [(f64, f64, f64, f64); 12] = [
        (0.7, 0.3, 0.5, 0.27242844072994759562),
        (0.7, 0.3, 0.75, 0.42282585934925033098),
        (0.5, 0.5, 0.3, 0.36901011956554538276),
        (0.9, 0.1, 0.2, 0.028183511555096531813),
        (0.1, 0.9, 0.8, 0.97181648844490346819),
        (0.25, 0.75, 0.6, 0.82365743928694817774),
        (1.5, 2.5, 0.35, 0.49613212142563551074),
        (2.0, 3.0, 0.5, 0.6875),
        (0.75, 0.75, 0.25, 0.28652369504439971865),
        (0.05, 0.95, 0.5, 0.96331882225378926901),
        (0.6, 0.4, 0.9999, 0.9809891548200464463),
        (0.6, 0.4, 1e-6, 0.0001267375478943725114),
    ];

    const GAMMA_P_REF: [(f64, f64, f64); 10] = [
        (0.5, 0.25, 0.52049987781304653768),
        (0.5, 1.0, 0.84270079294971486934),
        (0.5, 4.0, 0.99532226501895273416),
        (0.3, 0.1, 0.54591284959179648318),
        (0.3, 2.0, 0.97797401917285298449),
        (0.75, 0.5, 0.52793710983467178605),
        (1.5, 3.0, 0.88838977490528744002),
        (2.5, 1.0, 0.15085496391539036377),
        (0.25, 7.0, 0.99994666552313715958),
        (1.0, 1.0, 0.6321205588285576784),
    ];

    const GAMMA_UPPER_NEG_REF: [(f64, f64, f64); 5] = [
        (-0.5, 0.5, 0.5906913067325993444),
        (-0.25, 1.0, 0.1969865104349430181),
        (-0.75, 2.0, 0.023731339995251629045),
        (-0.3, 0.05, 4.0350094434447685311),
        (-0.6, 3.0, 0.005949767297498965113),
    ];

    const ERF_REF: [(f64, f64); 7] = [
        (0.1, 0.1124629160182848922),
        (0.5, 0.52049987781304653768),
        (1.0, 0.84270079294971486934),
        (2.0, 0.99532226501895273416),
        (3.5, 0.99999925690162765859),
        (-1.2, -0.91031397822963538024),
        (5.5, 0.99999999999999264215),
    ];

    fn rel_err(got: f64, want: f64) -> f64 {
        if want == 0.0 {
            got.abs()
        } else {
            ((got - want) / want).abs()
        }
    }

    #[test]
    fn gamma_matches_reference_to_1e12() {
        for &(x, g, lg) in &GAMMA_REF {
            assert!(
                rel_err(gamma(x), g) < 1e-12,
                "gamma({x}) = {} want {}",
                gamma(x),
                g
            );
            assert!(
                (ln_gamma(x) - lg).abs() < 1e-12 * (1.0 + lg.abs()),
                "ln_gamma({x})"
            );
        }
    }

    #[test]
    fn gamma_recurrence_holds() {
        for x in [0.07, 0.33, 0.51, 0.93, 1.41, 2.72] {
            let lhs = gamma(x + 1.0);
            let rhs = x * gamma(x);
            assert!(rel_err(lhs, rhs) < 1e-13, "recurrence at {x}");
        }
    }

    #[test]
    fn gamma_reflection_holds() {
        let pi = std::f64::consts::PI;
        for s in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let lhs = gamma(s) * gamma(1.0 - s);
            let rhs = pi / (pi * s).sin();
            assert!(rel_err(lhs, rhs) < 1e-13, "reflection at {s}");
        }
    }

    #[test]
    fn beta_inc_matches_reference_to_1e12() {
        for &(a, b, x, want) in &BETA_INC_REF {
            let got = beta_inc(a, b, x).unwrap();
            assert!(
                rel_err(got, want) < 1e-12,
                "I_{x}({a},{b}) = {got} want {want}"
            );
        }
    }

    #[test]
    fn beta_inc_symmetry() {
        for &(a, b, x, _) in &BETA_INC_REF {
            let lhs = beta_inc(a, b, x).unwrap();
            let rhs = 1.0 - beta_inc(b, a, 1.0 - x).unwrap();
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }

    #[test]
    fn gamma_p_matches_reference() {
        for &(a, x, want) in &GAMMA_P_REF {
            let got = gamma_p(a, x).unwrap();
            assert!(rel_err(got, want) < 1e-12, "P({a},{x}) = {got} want {want}");
            let q = gamma_q(a, x).unwrap();
            assert!((got + q - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn gamma_upper_negative_order_matches_reference() {
        for &(a, x, want) in &GAMMA_UPPER_NEG_REF {
            let got = gamma_upper(a, x).unwrap();
            assert!(
                rel_err(got, want) < 1e-11,
                "Gamma({a},{x}) = {got} want {want}"
            );
        }
    }

    #[test]
    fn erf_matches_reference() {
        for &(x, want) in &ERF_REF {
            assert!(rel_err(erf(x), want) < 1e-12, "erf({x})");
            assert!((erf(x) + erfc(x) - 1.0).abs() < 1e-12, "erf+erfc at {x}");
        }
    }

    #[test]
    fn domain_errors_name_offending_field() {
        assert!(beta_inc(-1.0, 0.5, 0.5).is_err());
        assert!(beta_inc(0.5, 0.5, 1.5).is_err());
        assert!(gamma_p(0.0, 1.0).is_err());
        assert!(gamma_upper(-0.5, 0.0).is_err());
    }
}
