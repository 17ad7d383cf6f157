//! Monte Carlo rate studies: risk against `n` under a bandwidth rule, under
//! a per-`n` oracle bandwidth, and at a frozen bandwidth.

use serde::{Deserialize, Serialize};

use super::{log_space, RateFit};
use crate::densities::TestDensity;
use crate::error::{Error, Result};
use crate::estimator::bandwidth_rule;
use crate::kernel::check_bandwidth;
use crate::risk::{mc_risk_multi, RiskReport};

/// Minimax exponent `-beta / (2 beta + 1)`.
pub fn minimax_exponent(beta: f64) -> f64 {
    -beta / (2.0 * beta + 1.0)
}

/// The exponent the best bandwidth can reach: the minimax one for `p <= 4`
/// and `-beta/(2 beta + 2 - 4/p)` for `p > 4`. Smoothness beyond 2 is not
/// exploited by the gamma kernel, so `beta` is capped at 2.
pub fn oracle_exponent(beta: f64, p: f64) -> f64 {
    let beta = beta.min(2.0);
    if p > 4.0 {
        -beta / (2.0 * beta + 2.0 - 4.0 / p)
    } else {
        minimax_exponent(beta)
    }
}

fn check_n_grid(op: &'static str, n_grid: &[usize]) -> Result<()> {
    if n_grid.len() < 4 {
        return Err(Error::domain(op, format!("n_grid needs >= 4 values, got {}", n_grid.len())));
    }
    if n_grid[0] == 0 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(op, "n_grid must be positive and strictly increasing"));
    }
    Ok(())
}

/// Risk reports along `n` with the fit of `log risk_norm` against `log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudy {
    pub reports: Vec<RiskReport>,
    pub fit: RateFit,
}

fn fit_reports(reports: &[RiskReport], theoretical: f64) -> Result<RateFit> {
    let xs: Vec<f64> = reports.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.risk_norm()).collect();
    RateFit::from_xy(&xs, &ys, theoretical)
}

/// Risk with `b = bandwidth_rule(n, beta, c)`; theoretical slope
/// `-beta/(2 beta + 1)`.
pub fn rate_experiment(
    d: &TestDensity,
    beta: f64,
    p: f64,
    c: f64,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<RateStudy> {
    check_n_grid("rate_experiment", n_grid)?;
    let mut reports = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let b = bandwidth_rule(n, beta, c)?;
        reports.push(mc_risk_multi(d, n, &[b], &[p], reps, seed)?[0][0]);
    }
    let fit = fit_reports(&reports, minimax_exponent(beta))?;
    Ok(RateStudy { reports, fit })
}

/// How the oracle searches bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BandwidthGrid {
    /// The same grid for every `n`.
    Fixed(Vec<f64>),
    /// `per_decade` log-spaced points per decade spanning `decades` decades
    /// centred on `c n^{-2/(2 beta + 1)}`.
    Centered {
        c: f64,
        beta: f64,
        per_decade: usize,
        decades: f64,
    },
}

impl BandwidthGrid {
    pub fn for_n(&self, n: usize) -> Result<Vec<f64>> {
        let grid = match self {
            BandwidthGrid::Fixed(g) => g.clone(),
            BandwidthGrid::Centered {
                c,
                beta,
                per_decade,
                decades,
            } => {
                let centre = c * (n as f64).powf(-2.0 / (2.0 * beta + 1.0));
                let half = 10f64.powf(decades / 2.0);
                let count = (*per_decade as f64 * decades).round() as usize + 1;
                if count < 2 {
                    return Err(Error::domain("BandwidthGrid", "grid spans less than one step"));
                }
                log_space(centre / half, centre * half, count)
            }
        };
        if grid.len() < 8 {
            return Err(Error::domain("oracle_bandwidth_slope", format!("b_grid needs >= 8 values, got {}", grid.len())));
        }
        for &b in &grid {
            check_bandwidth("oracle_bandwidth_slope", b)?;
        }
        Ok(grid)
    }
}

/// Per-`n` minimum over the bandwidth grid, for one `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleStudy {
    pub p: f64,
    /// The minimizing report for each `n`.
    pub best: Vec<RiskReport>,
    /// Every report, `[n][b]`.
    pub all: Vec<Vec<RiskReport>>,
    pub fit: RateFit,
}

impl OracleStudy {
    /// Whether the minimizer sits at an end of the grid for some `n`.
    pub fn hits_grid_edge(&self) -> bool {
        self.best
            .iter()
            .zip(&self.all)
            .any(|(best, row)| best.b == row[0].b || best.b == row[row.len() - 1].b)
    }
}

/// Oracle bandwidth slopes for several `p` from one set of replications:
/// for each `n` the samples are shared across all bandwidths and all `p`.
pub fn oracle_bandwidth_slopes(
    d: &TestDensity,
    beta: f64,
    ps: &[f64],
    n_grid: &[usize],
    b_grid: &BandwidthGrid,
    reps: usize,
    seed: u64,
) -> Result<Vec<OracleStudy>> {
    check_n_grid("oracle_bandwidth_slope", n_grid)?;
    let mut per_p: Vec<Vec<Vec<RiskReport>>> = vec![Vec::with_capacity(n_grid.len()); ps.len()];
    for &n in n_grid {
        let bs = b_grid.for_n(n)?;
        let table = mc_risk_multi(d, n, &bs, ps, reps, seed)?;
        for (ip, rows) in per_p.iter_mut().enumerate() {
            rows.push(table.iter().map(|row| row[ip]).collect());
        }
    }
    ps.iter()
        .zip(per_p)
        .map(|(&p, all)| {
            let best: Vec<RiskReport> = all
                .iter()
                .map(|row| {
                    // first minimum in grid order, so ties resolve deterministically
                    *row.iter()
                        .reduce(|a, r| if r.risk_p < a.risk_p { r } else { a })
                        .expect("grid is non-empty")
                })
                .collect();
            let fit = fit_reports(&best, oracle_exponent(beta, p))?;
            Ok(OracleStudy { p, best, all, fit })
        })
        .collect()
}

pub fn oracle_bandwidth_slope(
    d: &TestDensity,
    beta: f64,
    p: f64,
    n_grid: &[usize],
    b_grid: &BandwidthGrid,
    reps: usize,
    seed: u64,
) -> Result<OracleStudy> {
    Ok(oracle_bandwidth_slopes(d, beta, &[p], n_grid, b_grid, reps, seed)?.remove(0))
}

/// Risk at a frozen bandwidth as `n` grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagnantStudy {
    pub reports: Vec<RiskReport>,
    /// Fit over the top half of `n_grid` (at least 4 points); the
    /// theoretical slope is 0, the plateau.
    pub fit: RateFit,
    /// `||E f_hat - f||_p` at the frozen bandwidth: the plateau level.
    pub bias_floor: f64,
    /// `risk_norm / bias_floor - 1` at the largest `n`.
    pub plateau_gap: f64,
    /// `risk_norm / n^{minimax exponent}` along `n_grid`.
    pub ratio_to_minimax: Vec<f64>,
    /// Whether the ratio increases strictly over the top half of `n_grid`.
    pub ratio_increasing: bool,
}

pub fn stagnant_bandwidth_check(
    d: &TestDensity,
    b_fixed: f64,
    beta: f64,
    p: f64,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<StagnantStudy> {
    check_bandwidth("stagnant_bandwidth_check", b_fixed)?;
    check_n_grid("stagnant_bandwidth_check", n_grid)?;
    let reports = n_grid
        .iter()
        .map(|&n| Ok(mc_risk_multi(d, n, &[b_fixed], &[p], reps, seed)?[0][0]))
        .collect::<Result<Vec<_>>>()?;
    let top = (n_grid.len() / 2).min(n_grid.len() - 4);
    let fit = fit_reports(&reports[top..], 0.0)?;
    let bias_floor = reports[0].bias_term;
    let last = reports.last().expect("n_grid is non-empty");
    let plateau_gap = last.risk_norm() / bias_floor - 1.0;
    let e = minimax_exponent(beta);
    let ratio_to_minimax: Vec<f64> = reports.iter().map(|r| r.risk_norm() / (r.n as f64).powf(e)).collect();
    let ratio_increasing = ratio_to_minimax[top..].windows(2).all(|w| w[1] > w[0]);
    Ok(StagnantStudy {
        reports,
        fit,
        bias_floor,
        plateau_gap,
        ratio_to_minimax,
        ratio_increasing,
    })
}
