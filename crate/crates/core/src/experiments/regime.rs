//! Which `(p, beta)` pairs the gamma kernel estimator can serve at the
//! minimax rate.

use serde::{Deserialize, Serialize};

use super::rates::{oracle_bandwidth_slopes, BandwidthGrid};
use crate::densities::TestDensity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Minimax,
    /// `beta > 2`: the kernel's bias saturates at order `b`.
    NonMinimaxBeta,
    /// `beta <= 2` with `p` too large for the boundary variance, which
    /// includes the strip `3 <= p < 4`, `beta <= (p - 3)/(p - 2)`.
    NonMinimaxP,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Minimax => "Minimax",
            Regime::NonMinimaxBeta => "NonMinimaxBeta",
            Regime::NonMinimaxP => "NonMinimaxP",
        }
    }
}

pub fn check_cell(p: f64, beta: f64) -> Result<()> {
    if !(1.0..=8.0).contains(&p) {
        return Err(Error::domain("regime_map", format!("p = {p} must lie in [1, 8]")));
    }
    if !(beta > 0.0 && beta <= 4.0) {
        return Err(Error::domain("regime_map", format!("beta = {beta} must lie in (0, 4]")));
    }
    Ok(())
}

/// The analytic classification.
pub fn classify(p: f64, beta: f64) -> Regime {
    if beta > 2.0 {
        Regime::NonMinimaxBeta
    } else if p < 3.0 || (p < 4.0 && (p - 3.0) / (p - 2.0) < beta) {
        Regime::Minimax
    } else {
        Regime::NonMinimaxP
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeCell {
    pub p: f64,
    pub beta: f64,
    pub predicted: Regime,
    /// Oracle-bandwidth slope, when fitted.
    pub fitted_slope: Option<f64>,
    /// Risk-minimizing bandwidth at the largest `n`, when fitted.
    pub oracle_b: Option<f64>,
}

/// Analytic map over the grid, `p` outermost.
pub fn regime_map(p_grid: &[f64], beta_grid: &[f64]) -> Result<Vec<RegimeCell>> {
    let mut cells = Vec::with_capacity(p_grid.len() * beta_grid.len());
    for &p in p_grid {
        for &beta in beta_grid {
            check_cell(p, beta)?;
            cells.push(RegimeCell {
                p,
                beta,
                predicted: classify(p, beta),
                fitted_slope: None,
                oracle_b: None,
            });
        }
    }
    Ok(cells)
}

/// Attaches oracle-bandwidth slopes at reduced resolution. Each `beta` is
/// represented by `MirroredGamma(beta + 1, 0.2)`, whose smoothness at the
/// endpoint is exactly `beta`; all `p` of one `beta` share replications.
pub fn attach_fitted_slopes(cells: &mut [RegimeCell], n_grid: &[usize], reps: usize, seed: u64) -> Result<()> {
    let mut betas: Vec<f64> = cells.iter().map(|c| c.beta).collect();
    betas.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    betas.dedup();
    for beta in betas {
        let ps: Vec<f64> = cells.iter().filter(|c| c.beta == beta).map(|c| c.p).collect();
        let d = TestDensity::mirrored_gamma(beta + 1.0, 0.2)?;
        let grid = BandwidthGrid::Centered {
            c: 1.0,
            beta: beta.min(2.0),
            per_decade: 6,
            decades: 1.5,
        };
        let studies = oracle_bandwidth_slopes(&d, beta, &ps, n_grid, &grid, reps, seed)?;
        for (cell, study) in cells.iter_mut().filter(|c| c.beta == beta).zip(studies) {
            cell.fitted_slope = Some(study.fit.slope);
            cell.oracle_b = study.best.last().map(|r| r.b);
        }
    }
    Ok(())
}
