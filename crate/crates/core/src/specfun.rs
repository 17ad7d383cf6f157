//! Log-gamma, the regularized upper incomplete gamma function and the
//! Stirling ratio `R(u) = sqrt(2 pi) e^{-u} u^{u + 1/2} / Gamma(u + 1)`.
//!
//! Everything here works on the positive half-line only, so the Lanczos
//! sum is used without the reflection formula.

use crate::error::{Error, Result};

/// `ln(sqrt(2 pi))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Stirling-series tail is used for `ln R(u)` above this argument.
const STIRLING_SERIES_MIN: f64 = 10.0;

/// Natural log of the gamma function for `u > 0`.
pub fn log_gamma(u: f64) -> Result<f64> {
    if !u.is_finite() || u <= 0.0 {
        return Err(Error::domain("log_gamma", format!("u = {u} must be finite and > 0")));
    }
    Ok(ln_gamma(u))
}

/// Unchecked `ln Gamma(u)`; callers guarantee `u > 0`.
pub(crate) fn ln_gamma(u: f64) -> f64 {
    if u < 0.5 {
        // Gamma(u) = Gamma(u + 1) / u keeps the Lanczos sum in its accurate range.
        return ln_gamma_lanczos(u + 1.0) - u.ln();
    }
    ln_gamma_lanczos(u)
}

fn ln_gamma_lanczos(u: f64) -> f64 {
    let z = u - 1.0;
    let mut sum = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + sum.ln()
}

fn iteration_cap(a: f64) -> usize {
    // Both expansions need O(sqrt(a)) terms when z is close to a.
    500usize.max((20.0 * a.sqrt()).ceil() as usize)
}

/// Regularized upper incomplete gamma `Q(a, z) = Gamma(a, z) / Gamma(a)`.
///
/// Series for `z < a + 1`, Lentz continued fraction otherwise.
pub fn reg_gamma_upper(a: f64, z: f64) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::domain("reg_gamma_upper", format!("a = {a} must be finite and > 0")));
    }
    if z.is_nan() || z < 0.0 {
        return Err(Error::domain("reg_gamma_upper", format!("z = {z} must be >= 0")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z.is_infinite() {
        return Ok(0.0);
    }
    let log_prefactor = a * z.ln() - z - ln_gamma(a);
    if z < a + 1.0 {
        let p = lower_series(a, z, log_prefactor)?;
        Ok((1.0 - p).clamp(0.0, 1.0))
    } else {
        Ok(upper_continued_fraction(a, z, log_prefactor)?.clamp(0.0, 1.0))
    }
}

/// Regularized lower incomplete gamma `P(a, z) = 1 - Q(a, z)`.
pub fn reg_gamma_lower(a: f64, z: f64) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 || z.is_nan() || z < 0.0 {
        return Err(Error::domain("reg_gamma_lower", format!("a = {a}, z = {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(1.0);
    }
    let log_prefactor = a * z.ln() - z - ln_gamma(a);
    if z < a + 1.0 {
        Ok(lower_series(a, z, log_prefactor)?.clamp(0.0, 1.0))
    } else {
        Ok((1.0 - upper_continued_fraction(a, z, log_prefactor)?).clamp(0.0, 1.0))
    }
}

fn lower_series(a: f64, z: f64, log_prefactor: f64) -> Result<f64> {
    let cap = iteration_cap(a);
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..cap {
        ap += 1.0;
        term *= z / ap;
        sum += term;
        if term.abs() <= sum.abs() * 1e-15 {
            return Ok(sum * log_prefactor.exp());
        }
    }
    Err(Error::ConvergenceFailure {
        op: "reg_gamma series",
        iterations: cap,
    })
}

fn upper_continued_fraction(a: f64, z: f64, log_prefactor: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let cap = iteration_cap(a);
    let mut b = z + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=cap {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() <= 1e-15 {
            return Ok(log_prefactor.exp() * h);
        }
    }
    Err(Error::ConvergenceFailure {
        op: "reg_gamma continued fraction",
        iterations: cap,
    })
}

/// Value of the Stirling ratio at a given shape offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StirlingRatioValue {
    pub u: f64,
    pub value: f64,
}

/// Stirling ratio `R(u)`; `R(0) = 0` by continuity of the numerator.
pub fn stirling_ratio(u: f64) -> Result<StirlingRatioValue> {
    if u.is_nan() || u < 0.0 {
        return Err(Error::domain("stirling_ratio", format!("u = {u} must be >= 0")));
    }
    let value = if u == 0.0 {
        0.0
    } else if u.is_infinite() {
        1.0
    } else {
        ln_stirling_ratio(u).exp()
    };
    Ok(StirlingRatioValue { u, value })
}

/// `ln R(u)` for `u > 0`.
///
/// For `u >= 10` the log-gamma difference cancels badly, so the
/// Stirling series for `ln Gamma(u + 1) - ((u + 1/2) ln u - u + ln sqrt(2 pi))`
/// is summed directly (truncation error below 1e-15 there).
pub(crate) fn ln_stirling_ratio(u: f64) -> f64 {
    if u >= STIRLING_SERIES_MIN {
        let r = 1.0 / u;
        let r2 = r * r;
        let series = r
            * (1.0 / 12.0
                - r2 * (1.0 / 360.0
                    - r2 * (1.0 / 1260.0
                        - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0 - r2 * (691.0 / 360_360.0))))));
        -series
    } else {
        LN_SQRT_2PI - u + (u + 0.5) * u.ln() - ln_gamma(u + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    #[test]
    fn log_gamma_at_one_and_two_is_zero() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn log_gamma_half_is_ln_sqrt_pi() {
        // ln(sqrt(pi)) to 17 digits
        let expected = 0.572_364_942_924_700_08;
        assert!(rel_err(log_gamma(0.5).unwrap(), expected) < 1e-14);
    }

    #[test]
    fn log_gamma_matches_factorials_and_half_integers() {
        let mut fact = 1.0f64;
        for n in 1..=30u32 {
            // Gamma(n) = (n - 1)!
            let got = log_gamma(n as f64).unwrap();
            assert!(rel_err(got, fact.ln()) < 1e-13, "n = {n}");
            fact *= n as f64;
        }
        // Gamma(n + 1/2) = (2n)! sqrt(pi) / (4^n n!)
        let mut ln_val = 0.5 * std::f64::consts::PI.ln();
        for n in 1..=40u32 {
            ln_val += (n as f64 - 0.5).ln();
            let got = log_gamma(n as f64 + 0.5).unwrap();
            assert!(rel_err(got, ln_val) < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn log_gamma_large_argument_matches_stirling_series() {
        for &u in &[1e3f64, 1e5, 1e6, 1e8] {
            let stirling = (u - 0.5) * u.ln() - u + LN_SQRT_2PI + 1.0 / (12.0 * u)
                - 1.0 / (360.0 * u * u * u);
            assert!(rel_err(log_gamma(u).unwrap(), stirling) < 1e-13, "u = {u}");
        }
    }

    #[test]
    fn log_gamma_small_argument() {
        // Gamma(u) ~ 1/u - gamma_E for small u
        let u: f64 = 1e-3;
        let expected = (1.0 / u - 0.577_215_664_901_532_9 + 0.989_055_995_327_972_6 * u).ln();
        assert!(rel_err(log_gamma(u).unwrap(), expected) < 1e-9);
    }

    #[test]
    fn log_gamma_rejects_nonpositive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
        assert!(log_gamma(f64::INFINITY).is_err());
    }

    #[test]
    fn upper_gamma_shape_one_is_exponential() {
        for &t in &[0.0, 0.1, 1.0, 3.5, 20.0, 200.0] {
            let q = reg_gamma_upper(1.0, t).unwrap();
            assert!((q - (-t).exp()).abs() < 1e-14, "t = {t}");
        }
    }

    #[test]
    fn upper_gamma_at_zero_is_one() {
        for &a in &[0.3, 1.0, 7.5, 1e4] {
            assert_eq!(reg_gamma_upper(a, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn upper_gamma_two_two() {
        // oracle: Simpson rule on int_2^60 t e^{-t} dt
        let n = 200_000;
        let (lo, hi) = (2.0f64, 60.0f64);
        let h = (hi - lo) / n as f64;
        let f = |t: f64| t * (-t).exp();
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(lo + i as f64 * h);
        }
        let oracle = s * h / 3.0;
        assert!((oracle - 0.406_005_849_709_838_11).abs() < 1e-12);
        assert!((reg_gamma_upper(2.0, 2.0).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn upper_gamma_recurrence() {
        // Q(a+1, z) - Q(a, z) = z^a e^{-z} / Gamma(a+1)
        for &a in &[0.5, 1.0, 2.5, 7.0, 30.0, 250.0] {
            for &z in &[0.01, 0.5, 1.0, 3.0, 10.0, 40.0, 300.0] {
                let lhs = reg_gamma_upper(a + 1.0, z).unwrap() - reg_gamma_upper(a, z).unwrap();
                let rhs = (a * f64::ln(z) - z - ln_gamma(a + 1.0)).exp();
                assert!((lhs - rhs).abs() < 1e-11, "a = {a}, z = {z}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn upper_gamma_monotone_with_limits() {
        for &a in &[0.7f64, 1.0, 4.0, 51.0, 2000.0] {
            let mut prev = 1.0;
            let top = a + 60.0 * a.sqrt() + 60.0;
            for i in 0..=400 {
                let z = top * i as f64 / 400.0;
                let q = reg_gamma_upper(a, z).unwrap();
                assert!((0.0..=1.0).contains(&q));
                assert!(q <= prev + 1e-13, "a = {a}, z = {z}");
                prev = q;
            }
            assert!(prev < 1e-12);
        }
    }

    #[test]
    fn upper_plus_lower_is_one() {
        for &a in &[0.2, 3.0, 77.0] {
            for &z in &[0.05, 2.0, 80.0] {
                let s = reg_gamma_upper(a, z).unwrap() + reg_gamma_lower(a, z).unwrap();
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn upper_gamma_rejects_bad_input() {
        assert!(reg_gamma_upper(0.0, 1.0).is_err());
        assert!(reg_gamma_upper(1.0, -0.1).is_err());
        assert!(reg_gamma_upper(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn stirling_ratio_at_one() {
        let r = stirling_ratio(1.0).unwrap().value;
        assert!((r - 0.922_137_008_895_789_0).abs() < 1e-14);
    }

    #[test]
    fn stirling_ratio_large_u_close_to_one() {
        let r = stirling_ratio(1e6).unwrap().value;
        assert!((0.999_999_91..=1.0).contains(&r), "{r}");
        // asymptotic 1 - 1/(12 u)
        assert!((r - (1.0 - 1.0 / 12e6)).abs() < 1e-12);
    }

    #[test]
    fn stirling_ratio_zero_and_domain() {
        assert_eq!(stirling_ratio(0.0).unwrap().value, 0.0);
        assert!(stirling_ratio(-1e-9).is_err());
    }

    #[test]
    fn stirling_ratio_increasing_and_bounded() {
        let mut prev = 0.0;
        let mut u = 1e-4;
        while u < 1e7 {
            let r = stirling_ratio(u).unwrap().value;
            assert!(r > prev, "u = {u}");
            assert!(r.is_finite());
            if u >= 1.0 {
                assert!(r <= 1.0);
            }
            prev = r;
            u *= 1.07;
        }
        assert!(stirling_ratio(2.0).unwrap().value > stirling_ratio(1.0).unwrap().value);
    }

    #[test]
    fn stirling_identity_in_log_space() {
        for &u in &[0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1e4] {
            let lhs = log_gamma(u + 1.0).unwrap() + stirling_ratio(u).unwrap().value.ln();
            let rhs = LN_SQRT_2PI - u + (u + 0.5) * f64::ln(u);
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "u = {u}");
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        let below = LN_SQRT_2PI - 10.0 + 10.5 * 10f64.ln() - ln_gamma(11.0);
        assert!((ln_stirling_ratio(10.0) - below).abs() < 1e-13);
    }
}
