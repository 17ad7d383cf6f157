//! Deterministic bias studies: every number here is a quadrature of
//! `E f_hat - f`, no simulation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RateFit;
use crate::densities::TestDensity;
use crate::error::{Error, Result};
use crate::kernel::check_bandwidth;
use crate::quadrature::Mesh;
use crate::risk::{bias_term, MeanProfile};

/// Region over which an `L^1` bias is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BiasRegion {
    /// `[0, 1]`.
    Full,
    Interval { lo: f64, hi: f64 },
    /// Union of `|x - t_k| <= eps sqrt(b)` over the centres of the positive
    /// (even-indexed) bumps. Only meaningful for bump densities.
    BumpCores { eps: f64 },
}

impl BiasRegion {
    fn mesh(&self, d: &TestDensity, b: f64) -> Result<Mesh> {
        match *self {
            BiasRegion::Full => Ok(Mesh::graded(0.0, 1.0, b, &d.breakpoints())),
            BiasRegion::Interval { lo, hi } => {
                if !(0.0 <= lo && lo < hi && hi <= 3.0) {
                    return Err(Error::domain("BiasRegion", format!("[{lo}, {hi}] must be a sub-interval of [0, 3]")));
                }
                Ok(Mesh::graded(lo, hi, b, &d.breakpoints()))
            }
            BiasRegion::BumpCores { eps } => {
                if !(eps > 0.0 && eps <= 0.5) {
                    return Err(Error::domain("BiasRegion", format!("eps = {eps} must lie in (0, 1/2]")));
                }
                let shape = d
                    .bump_shape()
                    .ok_or_else(|| Error::InvalidSpec("BumpCores region needs a bump density".into()))?;
                let r = eps * b.sqrt();
                let mut mesh = Mesh {
                    nodes: Vec::new(),
                    weights: Vec::new(),
                    breakpoints: Vec::new(),
                };
                for k in (2..=2 * shape.n_pairs).step_by(2) {
                    let c = shape.center(k);
                    // the bump maximum sits at the centre: split there
                    let part = Mesh::from_breakpoints(&[c - r, c, c + r]);
                    mesh.nodes.extend(part.nodes);
                    mesh.weights.extend(part.weights);
                    mesh.breakpoints.extend(part.breakpoints);
                }
                Ok(mesh)
            }
        }
    }
}

/// `int_region |E f_hat - f|` at bandwidth `b`.
pub fn l1_bias(d: &TestDensity, b: f64, region: BiasRegion) -> Result<f64> {
    check_bandwidth("l1_bias", b)?;
    let mesh = region.mesh(d, b)?;
    Ok(MeanProfile::on_mesh(d, b, mesh)?.bias_lp_pow(1.0))
}

/// Bias values over a bandwidth grid with their power-law fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasStudy {
    pub b_grid: Vec<f64>,
    pub bias: Vec<f64>,
    pub fit: RateFit,
    /// `min_b bias(b) / b^theoretical`: the largest constant `c` with
    /// `bias >= c b^theoretical` on the grid.
    pub fitted_constant: f64,
}

impl BiasStudy {
    fn new(b_grid: &[f64], bias: Vec<f64>, theoretical: f64) -> Result<Self> {
        let fit = RateFit::from_xy(b_grid, &bias, theoretical)?;
        let fitted_constant = b_grid
            .iter()
            .zip(&bias)
            .map(|(b, v)| v / b.powf(theoretical))
            .fold(f64::INFINITY, f64::min);
        Ok(BiasStudy {
            b_grid: b_grid.to_vec(),
            bias,
            fit,
            fitted_constant,
        })
    }
}

fn check_grid(op: &'static str, b_grid: &[f64]) -> Result<()> {
    if b_grid.len() < 4 {
        return Err(Error::domain(op, format!("b_grid needs >= 4 values, got {}", b_grid.len())));
    }
    for &b in b_grid {
        check_bandwidth(op, b)?;
    }
    Ok(())
}

/// `B(b) = ||E f_hat - f||_p` for `RawUniform` against `b`; the jump at 1
/// leaks mass past the endpoint and the fit should find `b^{1/(2p)}`.
pub fn endpoint_leakage(p: f64, b_grid: &[f64]) -> Result<BiasStudy> {
    check_grid("endpoint_leakage", b_grid)?;
    let d = TestDensity::raw_uniform();
    let bias = b_grid
        .par_iter()
        .map(|&b| bias_term(&d, b, p))
        .collect::<Result<Vec<_>>>()?;
    BiasStudy::new(b_grid, bias, 1.0 / (2.0 * p))
}

/// The mollified control: `||E f_hat - f||_p` for `MolliUniform`.
pub fn endpoint_control(p: f64, b: f64) -> Result<f64> {
    bias_term(&TestDensity::molli_uniform(), b, p)
}

/// `L^1` bias of `MolliLinear(L)`, theoretical slope 1.
pub fn linear_bias_experiment(l: f64, b_grid: &[f64], region: BiasRegion) -> Result<BiasStudy> {
    check_grid("linear_bias_experiment", b_grid)?;
    let d = TestDensity::molli_linear(l)?;
    let bias = b_grid
        .iter()
        .map(|&b| l1_bias(&d, b, region))
        .collect::<Result<Vec<_>>>()?;
    BiasStudy::new(b_grid, bias, 1.0)
}

/// `L^1` bias of the mollified bump density built for each `b`,
/// theoretical slope `beta / 2`.
pub fn bump_bias_experiment(beta: f64, l: f64, b_grid: &[f64], region: BiasRegion) -> Result<BiasStudy> {
    check_grid("bump_bias_experiment", b_grid)?;
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::domain("bump_bias_experiment", format!("beta = {beta} must lie in (0, 2]")));
    }
    let bias = b_grid
        .iter()
        .map(|&b| l1_bias(&TestDensity::bump(beta, b, l)?, b, region))
        .collect::<Result<Vec<_>>>()?;
    BiasStudy::new(b_grid, bias, beta / 2.0)
}

/// Bandwidths with `N sqrt(b) = 1/24` exactly, so the bump layout is
/// self-similar along the grid (`N = n_min..=n_max` bumps pairs).
pub fn self_similar_bump_grid(n_min: usize, n_max: usize) -> Vec<f64> {
    // a hair above (1/(24N))^2 so that ceil(1/(24 sqrt b)) = N despite rounding
    (n_min..=n_max)
        .rev()
        .map(|n| (1.0 / (24.0 * n as f64)).powi(2) * (1.0 + 1e-9))
        .collect()
}
