//! The gamma kernel estimator `f_hat(x) = n^{-1} sum_i K_b(x, X_i)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{check_bandwidth, LogKernel};
use crate::quadrature::Mesh;

/// Bandwidth and evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub b: f64,
    pub eval_grid: Vec<f64>,
}

impl EstimatorConfig {
    pub fn new(b: f64, eval_grid: Vec<f64>) -> Result<Self> {
        check_bandwidth("EstimatorConfig", b)?;
        if eval_grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::domain("EstimatorConfig", "grid points must be finite and >= 0"));
        }
        if eval_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("EstimatorConfig", "grid must be strictly increasing"));
        }
        Ok(EstimatorConfig { b, eval_grid })
    }

    /// Grid of risk-quadrature nodes on `[0, 3]` for bandwidth `b`.
    pub fn with_default_grid(b: f64) -> Result<Self> {
        check_bandwidth("EstimatorConfig", b)?;
        Ok(EstimatorConfig {
            b,
            eval_grid: default_grid(b),
        })
    }
}

/// The quadrature nodes of the risk mesh, so estimates can be integrated
/// without interpolation.
pub fn default_grid(b: f64) -> Vec<f64> {
    Mesh::risk_window(b, &[]).nodes
}

/// Data with logarithms cached, reusable across bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    t: Vec<f64>,
    ln_t: Vec<f64>,
}

impl PreparedSample {
    pub fn new(data: &[f64]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::domain("estimate", "sample is empty"));
        }
        if let Some(bad) = data.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::domain("estimate", format!("data value {bad} is not a finite nonnegative number")));
        }
        Ok(Self::from_valid(data.to_vec()))
    }

    pub(crate) fn from_valid(t: Vec<f64>) -> Self {
        // -MAX rather than -inf keeps 0 * ln(0) = 0 for the x = 0 kernel
        let ln_t = t.iter().map(|v| if *v == 0.0 { -f64::MAX } else { v.ln() }).collect();
        PreparedSample { t, ln_t }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `f_hat(x)`. Terms go into `LANES` interleaved partial sums that are
    /// combined in a fixed order, so the result is deterministic and the
    /// loop vectorizes.
    pub fn eval(&self, x: f64, b: f64) -> f64 {
        const LANES: usize = 8;
        let k = LogKernel::new(x, b);
        let mut acc = [0.0; LANES];
        let mut t_chunks = self.t.chunks_exact(LANES);
        let mut l_chunks = self.ln_t.chunks_exact(LANES);
        for (tc, lc) in (&mut t_chunks).zip(&mut l_chunks) {
            for j in 0..LANES {
                acc[j] += k.eval_fast(tc[j], lc[j]);
            }
        }
        for (j, (t, lt)) in t_chunks.remainder().iter().zip(l_chunks.remainder()).enumerate() {
            acc[j] += k.eval_fast(*t, *lt);
        }
        let s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
        s / self.t.len() as f64
    }

    /// `f_hat` on a grid, grid points in parallel.
    pub fn eval_grid(&self, grid: &[f64], b: f64) -> Vec<f64> {
        grid.par_iter().map(|&x| self.eval(x, b)).collect()
    }

    /// Sequential variant for callers that already parallelize outside.
    pub fn eval_grid_seq(&self, grid: &[f64], b: f64) -> Vec<f64> {
        grid.iter().map(|&x| self.eval(x, b)).collect()
    }
}

/// `f_hat` at every point of `cfg.eval_grid`.
pub fn estimate(sample: &[f64], cfg: &EstimatorConfig) -> Result<Vec<f64>> {
    check_bandwidth("estimate", cfg.b)?;
    let prepared = PreparedSample::new(sample)?;
    Ok(prepared.eval_grid(&cfg.eval_grid, cfg.b))
}

/// `b_n = min(1, c n^{-2/(2 beta + 1)})`.
pub fn bandwidth_rule(n: usize, beta: f64, c: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("bandwidth_rule", "n must be >= 1"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::domain("bandwidth_rule", format!("beta = {beta} must be > 0")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain("bandwidth_rule", format!("c = {c} must be > 0")));
    }
    Ok((c * (n as f64).powf(-2.0 / (2.0 * beta + 1.0))).min(1.0))
}
