//! The gamma kernel `K_b(x, t)`: the gamma density in `t` with shape
//! `x/b + 1` and scale `b`.
//!
//! Everything is evaluated in log space. For `a = x/b >= 1` the normalizing
//! constant is rewritten with the Stirling ratio so that
//!
//! ```text
//! ln K_b(x, t) = -a (u - ln(1 + u)) - ln sqrt(2 pi x b) + ln R(a),   u = (t - x)/x,
//! ```
//!
//! which stays accurate for `x/b` in the millions.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::specfun::{self, ln_gamma, ln_stirling_ratio};

/// `c* = ln 3 - 1 + 1/3`, the exponential decay rate of `K_b(x, 1)` for `x >= 3`.
pub const C_STAR: f64 = 0.431_945_622_001_443_02;

/// Calibrated constant of the envelope `K_b(x, x) <= C b^{-1/2} (x + b)^{-1/2}`.
///
/// `K_b(x,x) sqrt(b (x + b))` depends on `a = x/b` alone and is maximal at
/// `a = 0`, where it equals 1 (see the `sup_envelope_*` tests).
pub const SUP_CONSTANT: f64 = 1.0;

/// One kernel `K_b(x, .)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub x: f64,
    pub b: f64,
}

impl KernelPoint {
    pub fn new(x: f64, b: f64) -> Result<Self> {
        if !(x.is_finite() && x >= 0.0) {
            return Err(Error::domain("KernelPoint", format!("x = {x} must be finite and >= 0")));
        }
        check_bandwidth("KernelPoint", b)?;
        Ok(KernelPoint { x, b })
    }

    /// Gamma shape `x/b + 1`.
    pub fn shape(&self) -> f64 {
        self.x / self.b + 1.0
    }

    pub fn scale(&self) -> f64 {
        self.b
    }

    /// `ln K_b(x, t)`; `-inf` at `t = 0` unless `x = 0`.
    pub fn log_pdf(&self, t: f64) -> f64 {
        let (x, b) = (self.x, self.b);
        let a = x / b;
        if t == 0.0 {
            return if x == 0.0 { -b.ln() } else { f64::NEG_INFINITY };
        }
        if a >= 1.0 {
            let u = (t - x) / x;
            // ln(1 + u) loses digits once 1 + u is small
            let log1p_u = if u > -0.5 { u.ln_1p() } else { t.ln() - x.ln() };
            -a * (u - log1p_u) - 0.5 * (2.0 * std::f64::consts::PI * x * b).ln() + ln_stirling_ratio(a)
        } else {
            a * t.ln() - t / b - (a + 1.0) * b.ln() - ln_gamma(a + 1.0)
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        self.log_pdf(t).exp()
    }

    /// Precomputed form for evaluating many `t` at this `x`.
    pub fn log_form(&self) -> LogKernel {
        LogKernel::new(self.x, self.b)
    }

    /// A draw of `xi_x ~ Gamma(x/b + 1, b)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_gamma(self.shape(), self.b, rng)
    }
}

pub(crate) fn check_bandwidth(op: &'static str, b: f64) -> Result<()> {
    if b.is_finite() && b > 0.0 && b <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(op, format!("bandwidth b = {b} must lie in (0, 1]")))
    }
}

/// `ln K_b(x, t) = a ln t - t/b + kappa` with `kappa` fixed per `x`.
///
/// This is the inner loop of the estimator: one multiply-add and one `exp`
/// per data point once `ln t` is cached.
#[derive(Debug, Clone, Copy)]
pub struct LogKernel {
    pub a: f64,
    pub inv_b: f64,
    pub kappa: f64,
}

impl LogKernel {
    pub fn new(x: f64, b: f64) -> Self {
        let a = x / b;
        let kappa = if a >= 1.0 {
            a * (1.0 - x.ln()) - 0.5 * (2.0 * std::f64::consts::PI * x * b).ln() + ln_stirling_ratio(a)
        } else {
            -(a + 1.0) * b.ln() - ln_gamma(a + 1.0)
        };
        LogKernel {
            a,
            inv_b: 1.0 / b,
            kappa,
        }
    }

    /// `K_b(x, t)` given `t` and `ln t`.
    #[inline]
    pub fn eval(&self, t: f64, ln_t: f64) -> f64 {
        if t == 0.0 {
            return if self.a == 0.0 { self.kappa.exp() } else { 0.0 };
        }
        (self.a * ln_t - t * self.inv_b + self.kappa).exp()
    }

    /// Branch-free `K_b(x, t)` for the estimator loop. `ln_t` must be
    /// `-f64::MAX` (not `-inf`) at `t = 0` so that `a = 0` gives `0 * ln_t = 0`.
    #[inline(always)]
    pub fn eval_fast(&self, t: f64, ln_t: f64) -> f64 {
        fast_exp(self.a * ln_t - t * self.inv_b + self.kappa)
    }
}

/// `exp` by Cody–Waite reduction and a degree-13 Taylor polynomial, written
/// without branches so the estimator loop vectorizes. Within a few ulp of
/// `f64::exp`; results below `2^-1022` are flushed to zero.
#[inline(always)]
pub fn fast_exp(x: f64) -> f64 {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    // adding 1.5 * 2^52 rounds to the nearest integer and leaves it in the low mantissa bits
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    const LO: f64 = -708.39;
    let xc = x.clamp(LO, 709.7);
    let k = xc * LOG2E + SHIFTER;
    let n = k - SHIFTER;
    let r = (xc - n * LN2_HI) - n * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    p = p * r + 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let bits = (k.to_bits() as i64 - SHIFTER.to_bits() as i64 + 1023) << 52;
    let v = p * f64::from_bits(bits as u64);
    if x < LO {
        0.0
    } else {
        v
    }
}

/// `K_b(x, t)`.
pub fn kernel_pdf(kp: KernelPoint, t: f64) -> Result<f64> {
    let kp = KernelPoint::new(kp.x, kp.b)?;
    if !(t >= 0.0) || t.is_infinite() {
        return Err(Error::domain("kernel_pdf", format!("t = {t} must be finite and >= 0")));
    }
    Ok(kp.pdf(t))
}

/// `(E xi_x, Var xi_x) = (x + b, x b + b^2)`.
pub fn kernel_mean_var(kp: KernelPoint) -> (f64, f64) {
    (kp.x + kp.b, kp.x * kp.b + kp.b * kp.b)
}

/// `P(xi_x > s) = Q(x/b + 1, s/b)`.
pub fn tail_prob(kp: KernelPoint, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain("tail_prob", format!("s = {s} must be >= 0")));
    }
    specfun::reg_gamma_upper(kp.shape(), s / kp.b)
}

/// `B_b(x) = int K_b(x,t)^2 dt = Gamma(2a+1) / (b 2^{2a+1} Gamma(a+1)^2)`, `a = x/b`.
///
/// The log-gamma terms are of size `2a ln 2a` and cancel to `O(ln a)`, so
/// from `a = 10` on the Stirling-ratio form is used instead; at `a = 3e4`
/// the direct form would already be off by 2e-10.
pub fn l2_integral(kp: KernelPoint) -> f64 {
    let a = kp.x / kp.b;
    if a >= 10.0 {
        return l2_from_ratio(a, kp.b, kp.x);
    }
    (ln_gamma(2.0 * a + 1.0) - (2.0 * a + 1.0) * std::f64::consts::LN_2 - 2.0 * ln_gamma(a + 1.0) - kp.b.ln()).exp()
}

fn l2_from_ratio(a: f64, b: f64, x: f64) -> f64 {
    let ln = 2.0 * ln_stirling_ratio(a) - ln_stirling_ratio(2.0 * a)
        - (2.0 * std::f64::consts::PI.sqrt()).ln()
        - 0.5 * (b * x).ln();
    ln.exp()
}

/// The same functional through the Stirling ratio,
/// `B_b(x) = R(a)^2 / (2 sqrt(pi) sqrt(b x) R(2a))`; requires `x > 0`.
pub fn l2_integral_stirling(kp: KernelPoint) -> Result<f64> {
    if kp.x <= 0.0 {
        return Err(Error::domain("l2_integral_stirling", "x must be > 0"));
    }
    Ok(l2_from_ratio(kp.x / kp.b, kp.b, kp.x))
}

/// `M_b(x) = sup_{t in [0,1]} K_b(x, t) = K_b(x, min(x, 1))`.
pub fn sup_on_unit_interval(kp: KernelPoint) -> f64 {
    kp.pdf(kp.x.min(1.0))
}

/// `Q_{b,delta}(x) = K_b(x, x + delta sqrt(b)) / K_b(x, x)`.
pub fn local_ratio(kp: KernelPoint, delta: f64) -> Result<f64> {
    let sb = kp.b.sqrt();
    if !(kp.x + delta * sb > 0.0) {
        return Err(Error::domain(
            "local_ratio",
            format!("x + delta sqrt(b) = {} must be > 0", kp.x + delta * sb),
        ));
    }
    if kp.x == 0.0 {
        return Ok((-delta / sb).exp());
    }
    Ok(((kp.x / kp.b) * (delta * sb / kp.x).ln_1p() - delta / sb).exp())
}

/// The three envelopes attached to one kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBounds {
    /// `C b^{-1/2} (x + b)^{-1/2}` with `C = SUP_CONSTANT`.
    pub sup_bound: f64,
    /// `B_b(x)`.
    pub l2_value: f64,
    /// `exp(-c* x / b) / sqrt(2 pi x b)`, an upper bound on `M_b(x)` valid for `x >= 3`.
    pub tail_bound: f64,
}

pub fn kernel_bounds(kp: KernelPoint) -> KernelBounds {
    let (x, b) = (kp.x, kp.b);
    let sup_bound = SUP_CONSTANT / (b * (x + b)).sqrt();
    let tail_bound = if x > 0.0 {
        (-C_STAR * x / b - 0.5 * (2.0 * std::f64::consts::PI * x * b).ln()).exp()
    } else {
        f64::INFINITY
    };
    KernelBounds {
        sup_bound,
        l2_value: l2_integral(kp),
        tail_bound,
    }
}

/// Analytic bound on `int_3^inf M_b(x)^p dx`.
///
/// For `x >= 3`, `M_b(x) = K_b(x, 1) <= exp(-c* x/b) / sqrt(2 pi x b)`, so the
/// integral is at most `(6 pi b)^{-p/2} b/(p c*) exp(-3 p c*/b)`. Any
/// estimate from data in `[0,1]`, its mean, and their difference are all
/// dominated by `M_b` there.
pub fn window_tail_bound(b: f64, p: f64) -> f64 {
    let ln = -0.5 * p * (6.0 * std::f64::consts::PI * b).ln() + (b / (p * C_STAR)).ln() - 3.0 * p * C_STAR / b;
    ln.exp()
}

/// Marsaglia–Tsang sampler for `Gamma(shape, scale)`, `shape >= 1`.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    debug_assert!(shape >= 1.0);
    let d = shape - 1.0 / 3.0;
    let c = (9.0 * d).sqrt().recip();
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * z;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        let z2 = z * z;
        if u < 1.0 - 0.0331 * z2 * z2 || u.ln() < 0.5 * z2 + d * (1.0 - v + v.ln()) {
            return d * v * scale;
        }
    }
}
