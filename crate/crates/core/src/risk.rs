//! Bias functionals by quadrature and Monte Carlo `L^p` risk.
//!
//! The risk `E ||f_hat - f||_p^p` is integrated over the window `[0, 3]` on
//! the graded mesh, plus the analytic bound on `[3, inf)` from
//! [`window_tail_bound`]. The centring `E f_hat(x) = int K_b(x,t) f(t) dt` is
//! always computed by adaptive quadrature, never by simulation, so the
//! deterministic term `B_n = ||E f_hat - f||_p` and the stochastic term
//! `A_n = (E ||f_hat - E f_hat||_p^p)^{1/p}` stay cleanly separated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::TestDensity;
use crate::error::{Error, Result};
use crate::estimator::PreparedSample;
use crate::kernel::{check_bandwidth, window_tail_bound, KernelPoint};
use crate::quadrature::{Adaptive, Mesh};
use crate::rng;

/// Absolute tolerance of the inner `t`-integrals.
const INNER_TOL: f64 = 1e-11;

/// Breakpoints for integrating `K_b(x, .) g` over `[0, 1]`.
pub fn kernel_breaks(x: f64, b: f64, extra: &[f64]) -> Vec<f64> {
    let sd = (x * b + b * b).sqrt();
    let mut br = Vec::with_capacity(extra.len() + 24);
    br.extend_from_slice(extra);
    br.extend([0.0, 1.0]);
    for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
        br.push(x + k * sd);
    }
    for k in [1.0, 4.0, 16.0, 64.0] {
        br.push(k * b);
        br.push(1.0 - k * b);
    }
    br.retain(|t| (0.0..=1.0).contains(t));
    br
}

fn kernel_integral<G: Fn(f64) -> f64>(d: &TestDensity, b: f64, x: f64, op: &'static str, g: G) -> Result<f64> {
    let kp = KernelPoint::new(x, b)?;
    Adaptive::with_abs_tol(INNER_TOL).integrate(|t| g(kp.pdf(t)) * d.pdf(t), &kernel_breaks(x, b, &d.breakpoints()), op)
}

/// `E f_hat(x) = int_0^1 K_b(x, t) f(t) dt`.
pub fn exact_mean_estimate(d: &TestDensity, b: f64, x: f64) -> Result<f64> {
    kernel_integral(d, b, x, "exact_mean_estimate", |k| k)
}

/// `E K_b(x, X)^2 = int_0^1 K_b(x, t)^2 f(t) dt`.
pub fn exact_second_moment(d: &TestDensity, b: f64, x: f64) -> Result<f64> {
    kernel_integral(d, b, x, "exact_second_moment", |k| k * k)
}

/// `Var f_hat(x) = (E K^2 - (E K)^2) / n`.
pub fn exact_variance(d: &TestDensity, b: f64, n: usize, x: f64) -> Result<f64> {
    let m1 = exact_mean_estimate(d, b, x)?;
    let m2 = exact_second_moment(d, b, x)?;
    Ok((m2 - m1 * m1) / n as f64)
}

/// `f` and `E f_hat` tabulated on a mesh.
#[derive(Debug, Clone)]
pub struct MeanProfile {
    pub b: f64,
    pub mesh: Mesh,
    pub density: Vec<f64>,
    pub mean: Vec<f64>,
}

impl MeanProfile {
    /// Profile on the risk window `[0, 3]`.
    pub fn window(d: &TestDensity, b: f64) -> Result<Self> {
        check_bandwidth("MeanProfile", b)?;
        Self::on_mesh(d, b, Mesh::risk_window(b, &d.breakpoints()))
    }

    /// Profile on `[lo, hi]` with the same grading rules.
    pub fn interval(d: &TestDensity, b: f64, lo: f64, hi: f64) -> Result<Self> {
        check_bandwidth("MeanProfile", b)?;
        Self::on_mesh(d, b, Mesh::graded(lo, hi, b, &d.breakpoints()))
    }

    pub fn on_mesh(d: &TestDensity, b: f64, mesh: Mesh) -> Result<Self> {
        let mean = mesh
            .nodes
            .par_iter()
            .map(|&x| exact_mean_estimate(d, b, x))
            .collect::<Result<Vec<f64>>>()?;
        let density = mesh.nodes.iter().map(|&x| d.pdf(x)).collect();
        Ok(MeanProfile { b, mesh, density, mean })
    }

    /// `int |E f_hat - f|^p` over the mesh (no tail term).
    pub fn bias_lp_pow(&self, p: f64) -> f64 {
        self.mesh
            .weights
            .iter()
            .zip(self.mean.iter().zip(&self.density))
            .map(|(w, (m, f))| w * (m - f).abs().powf(p))
            .sum()
    }
}

/// `B_n(b, f) = (int_0^3 |E f_hat - f|^p + tail)^{1/p}`.
pub fn bias_term(d: &TestDensity, b: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    let prof = MeanProfile::window(d, b)?;
    Ok((prof.bias_lp_pow(p) + window_tail_bound(b, p)).powf(1.0 / p))
}

/// `(int_lo^hi |E f_hat - f|^p)^{1/p}` over a sub-interval of `[0, 3]`.
pub fn bias_term_on(d: &TestDensity, b: f64, p: f64, lo: f64, hi: f64) -> Result<f64> {
    check_p(p)?;
    if !(0.0 <= lo && lo < hi && hi <= 3.0) {
        return Err(Error::domain("bias_term_on", format!("[{lo}, {hi}] must be a sub-interval of [0, 3]")));
    }
    let prof = MeanProfile::interval(d, b, lo, hi)?;
    Ok(prof.bias_lp_pow(p).powf(1.0 / p))
}

/// Exact `L^2` risk split as `E ||f_hat - f||_2^2 = bias_sq + integrated_variance`,
/// both over the window `[0, 3]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Risk {
    pub n: usize,
    pub b: f64,
    pub bias_sq: f64,
    pub integrated_variance: f64,
}

impl L2Risk {
    /// `(E ||f_hat - f||_2^2)^{1/2}`.
    pub fn risk_norm(&self) -> f64 {
        (self.bias_sq + self.integrated_variance).sqrt()
    }

    /// The same split at another sample size: the variance scales as `1/n`.
    pub fn at_n(&self, n: usize) -> L2Risk {
        L2Risk {
            n,
            integrated_variance: self.integrated_variance * self.n as f64 / n as f64,
            ..*self
        }
    }
}

pub fn exact_l2_risk(d: &TestDensity, b: f64, n: usize) -> Result<L2Risk> {
    if n == 0 {
        return Err(Error::domain("exact_l2_risk", "n must be >= 1"));
    }
    let prof = MeanProfile::window(d, b)?;
    let m2 = prof
        .mesh
        .nodes
        .par_iter()
        .map(|&x| exact_second_moment(d, b, x))
        .collect::<Result<Vec<f64>>>()?;
    let var: f64 = prof
        .mesh
        .weights
        .iter()
        .zip(m2.iter().zip(&prof.mean))
        .map(|(w, (m2, m))| w * (m2 - m * m))
        .sum();
    Ok(L2Risk {
        n,
        b,
        bias_sq: prof.bias_lp_pow(2.0),
        integrated_variance: var / n as f64,
    })
}

/// `I(b, p) = int_b^{1/2} x^{-p/4} dx`.
pub fn i_integral(b: f64, p: f64) -> Result<f64> {
    if !(b > 0.0 && b < 0.5) {
        return Err(Error::domain("i_integral", format!("b = {b} must lie in (0, 1/2)")));
    }
    check_p(p)?;
    if p == 4.0 {
        return Ok((0.5 / b).ln());
    }
    let e = 1.0 - p / 4.0;
    Ok((0.5f64.powf(e) - b.powf(e)) / e)
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::domain("risk", format!("p = {p} must be finite and >= 1")))
    }
}

/// Monte Carlo `L^p` risk at one `(n, b, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub p: f64,
    pub n: usize,
    pub b: f64,
    /// Estimate of `E ||f_hat - f||_p^p`.
    pub risk_p: f64,
    /// Standard error of `risk_p`.
    pub stderr: f64,
    /// `||E f_hat - f||_p`.
    pub bias_term: f64,
    /// `(E ||f_hat - E f_hat||_p^p)^{1/p}`.
    pub stoch_term: f64,
    pub replications: usize,
    /// Bound on the neglected `[3, inf)` contribution (already included above).
    pub tail_bound: f64,
}

impl RiskReport {
    /// `(E ||f_hat - f||_p^p)^{1/p}`.
    pub fn risk_norm(&self) -> f64 {
        self.risk_p.powf(1.0 / self.p)
    }
}

/// Per-replication integrals for one bandwidth: `[p][rep] -> (err, fluct)`.
type RepIntegrals = Vec<(f64, f64)>;

/// Risk for every `(b, p)` pair from one set of replications: the samples
/// of replication `r` are shared across all bandwidths and exponents
/// (common random numbers). Output is indexed `[b][p]`.
pub fn mc_risk_multi(
    d: &TestDensity,
    n: usize,
    bs: &[f64],
    ps: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<Vec<RiskReport>>> {
    if n == 0 {
        return Err(Error::domain("mc_risk", "n must be >= 1"));
    }
    if reps < 2 {
        return Err(Error::domain("mc_risk", format!("reps = {reps} must be >= 2")));
    }
    for &p in ps {
        check_p(p)?;
    }
    let profiles = bs
        .iter()
        .map(|&b| MeanProfile::window(d, b))
        .collect::<Result<Vec<_>>>()?;

    // per rep: [b][p] -> (int |f_hat - f|^p, int |f_hat - E f_hat|^p)
    let per_rep: Vec<Vec<RepIntegrals>> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<RepIntegrals>> {
            let mut rng = rng::stream(seed, &[n as u64, r as u64]);
            let sample = PreparedSample::from_valid(d.sample(n, &mut rng)?);
            Ok(profiles
                .iter()
                .map(|prof| {
                    let fhat = sample.eval_grid_seq(&prof.mesh.nodes, prof.b);
                    ps.iter()
                        .map(|&p| {
                            let mut err = 0.0;
                            let mut fluct = 0.0;
                            for i in 0..fhat.len() {
                                let w = prof.mesh.weights[i];
                                err += w * (fhat[i] - prof.density[i]).abs().powf(p);
                                fluct += w * (fhat[i] - prof.mean[i]).abs().powf(p);
                            }
                            (err, fluct)
                        })
                        .collect()
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(bs.len());
    for (ib, prof) in profiles.iter().enumerate() {
        let mut row = Vec::with_capacity(ps.len());
        for (ip, &p) in ps.iter().enumerate() {
            let tail = window_tail_bound(prof.b, p);
            let errs: Vec<f64> = per_rep.iter().map(|v| v[ib][ip].0).collect();
            let flucts: Vec<f64> = per_rep.iter().map(|v| v[ib][ip].1).collect();
            let (mean_err, sd_err) = mean_sd(&errs);
            let (mean_fluct, _) = mean_sd(&flucts);
            row.push(RiskReport {
                p,
                n,
                b: prof.b,
                risk_p: mean_err + tail,
                stderr: sd_err / (reps as f64).sqrt(),
                bias_term: (prof.bias_lp_pow(p) + tail).powf(1.0 / p),
                stoch_term: (mean_fluct + tail).powf(1.0 / p),
                replications: reps,
                tail_bound: tail,
            });
        }
        out.push(row);
    }
    Ok(out)
}

/// Risk at a single `(n, b, p)`.
pub fn mc_risk(d: &TestDensity, n: usize, b: f64, p: f64, reps: usize, seed: u64) -> Result<RiskReport> {
    Ok(mc_risk_multi(d, n, &[b], &[p], reps, seed)?[0][0])
}

/// Sample mean and standard deviation, summed in index order.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// `E int_{1/4}^{1/2} |f_hat - E f_hat| dx` by simulation.
pub fn fluctuation_l1(d: &TestDensity, n: usize, b: f64, reps: usize, seed: u64) -> Result<McEstimate> {
    if n == 0 || reps < 2 {
        return Err(Error::domain("fluctuation_l1", "need n >= 1 and reps >= 2"));
    }
    let prof = MeanProfile::interval(d, b, 0.25, 0.5)?;
    let vals = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = rng::stream(seed, &[n as u64, r as u64]);
            let sample = PreparedSample::from_valid(d.sample(n, &mut rng)?);
            let fhat = sample.eval_grid_seq(&prof.mesh.nodes, b);
            Ok(prof
                .mesh
                .weights
                .iter()
                .zip(fhat.iter().zip(&prof.mean))
                .map(|(w, (f, m))| w * (f - m).abs())
                .sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, sd) = mean_sd(&vals);
    Ok(McEstimate {
        mean,
        stderr: sd / (reps as f64).sqrt(),
    })
}
