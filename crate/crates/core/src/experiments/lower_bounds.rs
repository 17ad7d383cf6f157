//! Lower-bound machinery behind the non-minimaxity results, each reduced
//! to a computable predicate: Chernoff tails, the local kernel floor, the
//! pointwise variance floor, the `L^1` fluctuation floor and the analytic
//! rare-event bound for bandwidths with `n sqrt(b)` bounded.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::log_space;
use crate::densities::TestDensity;
use crate::error::{Error, Result};
use crate::kernel::{check_bandwidth, local_ratio, tail_prob, KernelPoint};
use crate::quadrature::Mesh;
use crate::risk::{exact_variance, fluctuation_l1, i_integral, McEstimate};

/// `2 exp(-(1 - ln 2) / (2 b))`, the Chernoff bound on `P(xi_x > 1)` for
/// `x in [0, 1/2]`.
pub fn chernoff_bound(b: f64) -> f64 {
    2.0 * (-(1.0 - std::f64::consts::LN_2) / (2.0 * b)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffRow {
    pub b: f64,
    pub x: f64,
    pub tail: f64,
    pub bound: f64,
}

/// `P(xi_x > 1)` against [`chernoff_bound`] on every `(b, x)` pair.
pub fn chernoff_check(bs: &[f64], xs: &[f64]) -> Result<Vec<ChernoffRow>> {
    let mut rows = Vec::with_capacity(bs.len() * xs.len());
    for &b in bs {
        for &x in xs {
            if !(0.0..=0.5).contains(&x) {
                return Err(Error::domain("chernoff_check", format!("x = {x} must lie in [0, 1/2]")));
            }
            let tail = tail_prob(KernelPoint::new(x, b)?, 1.0)?;
            rows.push(ChernoffRow {
                b,
                x,
                tail,
                bound: chernoff_bound(b),
            });
        }
    }
    Ok(rows)
}

/// `min_{x in [a0, a1]} sqrt(b) K_b(x, x + delta sqrt(b))` on `x_points`
/// equispaced points, for each `b`; tends to
/// `min_x exp(-delta^2 / (2x)) / sqrt(2 pi x)` as `b -> 0`.
pub fn k_local_lower(bs: &[f64], delta: f64, a0: f64, a1: f64, x_points: usize) -> Result<Vec<(f64, f64)>> {
    if !(0.0 < a0 && a0 < a1 && a1 < 1.0) || !(delta > 0.0 && delta < 3.0) || x_points < 2 {
        return Err(Error::domain("k_local_lower", "need 0 < a0 < a1 < 1, 0 < delta < 3, >= 2 points"));
    }
    bs.iter()
        .map(|&b| {
            let mut m = f64::INFINITY;
            for i in 0..x_points {
                let x = a0 + (a1 - a0) * i as f64 / (x_points - 1) as f64;
                let kp = KernelPoint::new(x, b)?;
                m = m.min(b.sqrt() * kp.pdf(x + delta * b.sqrt()));
            }
            Ok((b, m))
        })
        .collect()
}

pub fn k_local_limit(delta: f64, a0: f64, a1: f64) -> f64 {
    let g = |x: f64| (-delta * delta / (2.0 * x)).exp() / (2.0 * std::f64::consts::PI * x).sqrt();
    // g is unimodal in x; the minimum over an interval sits at an end
    g(a0).min(g(a1))
}

/// `n Var f_hat(x) sqrt(b) sqrt(x)` on a grid of `x` in `[b, 1/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub b: f64,
    pub n: usize,
    /// `(x, Var f_hat(x), n Var sqrt(b x))`.
    pub points: Vec<(f64, f64, f64)>,
    /// Smallest scaled value: the constant `c` in `Var >= c b^{-1/2} x^{-1/2} / n`.
    pub fitted_c: f64,
}

pub fn variance_predicate(d: &TestDensity, b: f64, n: usize, x_points: usize) -> Result<VarianceCheck> {
    check_bandwidth("variance_predicate", b)?;
    if !(b < 0.5) || n == 0 || x_points < 2 {
        return Err(Error::domain("variance_predicate", "need b < 1/2, n >= 1 and >= 2 points"));
    }
    let xs = log_space(b, 0.5, x_points);
    let points = xs
        .par_iter()
        .map(|&x| {
            let v = exact_variance(d, b, n, x)?;
            Ok((x, v, n as f64 * v * (b * x).sqrt()))
        })
        .collect::<Result<Vec<_>>>()?;
    let fitted_c = points.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    Ok(VarianceCheck { b, n, points, fitted_c })
}

/// The integrated variance floor `2^{-p} int_b^{1/2} Var^{p/2} dx` against
/// `I(b, p) / (n sqrt(b))^{p/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceFloor {
    pub b: f64,
    pub n: usize,
    pub p: f64,
    pub floor: f64,
    pub i_integral: f64,
    /// `floor (n sqrt(b))^{p/2} / I(b, p)`, bounded below uniformly.
    pub ratio: f64,
}

pub fn nonminimax_var_floor(d: &TestDensity, b: f64, n: usize, p: f64) -> Result<VarianceFloor> {
    let i = i_integral(b, p)?;
    if n == 0 {
        return Err(Error::domain("nonminimax_var_floor", "n must be >= 1"));
    }
    let mesh = Mesh::graded(b, 0.5, b, &[]);
    let vals = mesh
        .nodes
        .par_iter()
        .map(|&x| exact_variance(d, b, n, x).map(|v| v.max(0.0).powf(p / 2.0)))
        .collect::<Result<Vec<_>>>()?;
    let floor = 2f64.powf(-p) * mesh.integrate_values(&vals);
    let ratio = floor * (n as f64 * b.sqrt()).powf(p / 2.0) / i;
    Ok(VarianceFloor {
        b,
        n,
        p,
        floor,
        i_integral: i,
        ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationPoint {
    pub n: usize,
    pub b: f64,
    pub fluctuation: McEstimate,
    /// `fluctuation sqrt(n) b^{1/4}`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationFloor {
    pub points: Vec<FluctuationPoint>,
    /// Smallest scaled value.
    pub fitted_c: f64,
    /// Largest over smallest scaled value.
    pub spread: f64,
}

/// `E int_{1/4}^{1/2} |f_hat - E f_hat|` scaled by `sqrt(n) b^{1/4}` on all
/// `(n, b)` with `n sqrt(b) >= min_s`.
pub fn fluctuation_floor(
    d: &TestDensity,
    ns: &[usize],
    bs: &[f64],
    min_s: f64,
    reps: usize,
    seed: u64,
) -> Result<FluctuationFloor> {
    let mut points = Vec::new();
    for &n in ns {
        for &b in bs {
            if (n as f64) * b.sqrt() < min_s {
                continue;
            }
            let fluctuation = fluctuation_l1(d, n, b, reps, seed)?;
            points.push(FluctuationPoint {
                n,
                b,
                fluctuation,
                scaled: fluctuation.mean * (n as f64).sqrt() * b.powf(0.25),
            });
        }
    }
    if points.is_empty() {
        return Err(Error::domain("fluctuation_floor", "no (n, b) pair satisfies n sqrt(b) >= min_s"));
    }
    let lo = points.iter().map(|p| p.scaled).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.scaled).fold(0.0, f64::max);
    Ok(FluctuationFloor {
        points,
        fitted_c: lo,
        spread: hi / lo,
    })
}

/// Default `C_0` for [`stagnant_variance_bound`]: with the local decay
/// constant `c` close to `1/(2x) >= 1` on `[1/4, 1/2]`, `c C_0 - 1/2` is
/// comfortably positive.
pub const DEFAULT_C0: f64 = 2.0;

/// Analytic evaluation of the rare-event argument for `b = s^2 / n^2`:
/// with `delta = sqrt(C_0 ln(1/b))`, no observation falls within
/// `delta sqrt(b)` of `x` with probability at least `exp(-4 delta s)`,
/// and on that event `f_hat(x)` is at most the kernel value at distance
/// `delta sqrt(b)`, which must be `<= 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagnantVarianceBound {
    pub n: usize,
    pub s: f64,
    pub c0: f64,
    pub b: f64,
    pub delta: f64,
    /// `(1 - 2 delta sqrt(b))^n`.
    pub event_prob: f64,
    /// `exp(-4 delta s)`.
    pub event_prob_bound: f64,
    /// `max_x max K_b(x, x +- delta sqrt(b))` over `x in [1/4, 1/2]`.
    pub kernel_max: f64,
    /// `min_x min_± -ln Q_{b,±delta}(x) / delta^2`.
    pub c_fit: f64,
    /// `c_fit C_0 - 1/2`.
    pub exponent: f64,
    /// `max_x K_b(x, x) b^{c_fit C_0}`: the kernel bound `C b^{c C_0 - 1/2}`
    /// with its constant evaluated.
    pub kernel_bound: f64,
    /// `exp(-4 delta s) / 8`, a lower bound on `E int_{1/4}^{1/2} |f_hat - 1|`.
    pub l1_risk_lower: f64,
}

impl StagnantVarianceBound {
    /// All the inequalities the argument needs hold at this `(n, s, C_0)`.
    pub fn holds(&self) -> bool {
        self.event_prob >= self.event_prob_bound
            && self.kernel_max <= 0.5
            && self.kernel_max <= self.kernel_bound * (1.0 + 1e-12)
            && self.exponent > 0.0
    }
}

pub fn stagnant_variance_bound(n: usize, s: f64, c0: f64, x_points: usize) -> Result<StagnantVarianceBound> {
    if n == 0 || !(s > 0.0) || !(c0 > 0.0) || x_points < 2 {
        return Err(Error::domain("stagnant_variance_bound", "need n >= 1, s > 0, C0 > 0, >= 2 points"));
    }
    let b = (s / n as f64).powi(2);
    check_bandwidth("stagnant_variance_bound", b)?;
    let delta = (c0 * (1.0 / b).ln()).sqrt();
    let r = delta * b.sqrt();
    if !(r < 0.25) {
        return Err(Error::domain(
            "stagnant_variance_bound",
            format!("delta sqrt(b) = {r} must be < 1/4 so the window stays inside (0, 7/8)"),
        ));
    }
    let event_prob = (n as f64 * (-2.0 * r).ln_1p()).exp();
    let event_prob_bound = (-4.0 * delta * s).exp();
    let mut kernel_max: f64 = 0.0;
    let mut c_fit = f64::INFINITY;
    let mut mode_max: f64 = 0.0;
    for i in 0..x_points {
        let x = 0.25 + 0.25 * i as f64 / (x_points - 1) as f64;
        let kp = KernelPoint::new(x, b)?;
        let mode = kp.pdf(x);
        mode_max = mode_max.max(mode);
        for sign in [-1.0, 1.0] {
            kernel_max = kernel_max.max(kp.pdf(x + sign * r));
            let q = local_ratio(kp, sign * delta)?;
            c_fit = c_fit.min(-q.ln() / (delta * delta));
        }
    }
    Ok(StagnantVarianceBound {
        n,
        s,
        c0,
        b,
        delta,
        event_prob,
        event_prob_bound,
        kernel_max,
        c_fit,
        exponent: c_fit * c0 - 0.5,
        kernel_bound: mode_max * b.powf(c_fit * c0),
        l1_risk_lower: event_prob_bound / 8.0,
    })
}
