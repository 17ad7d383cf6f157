//! Hölder-quotient scans of the mirrored gamma density at the endpoint 1.
//!
//! With `m = ceil(beta) - 1`, the quotient at scale `h` is
//! `q(h) = |f^{(m)}(1 - h) - f^{(m)}(1+)| / h^{beta - m}`, where
//! `f^{(m)}(1+) = 0` because the density vanishes beyond 1. If `f` belongs
//! to `Sigma(beta, L)` then `q <= L` for every `h`; otherwise `q` grows
//! like `h^{-(beta - alpha + 1)}` as `h -> 0`.

use serde::{Deserialize, Serialize};

use crate::densities::{gamma_pdf_derivative, holder_member_mirrored, HolderClass, TestDensity};
use crate::error::{Error, Result};

/// Dyadic scales `h = 2^{-k}` for `k` in this range.
pub const SCAN_LEVELS: std::ops::RangeInclusive<i32> = 6..=40;
/// Levels at the fine end used to measure growth.
const GROWTH_LEVELS: usize = 8;
/// A quotient counts as bounded when `log2 q` grows by at most this much
/// per halving of `h`; unbounded cells grow by `beta - alpha + 1 >= 1/2`
/// on the acceptance grid, bounded ones by `<= 0`.
pub const GROWTH_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityCell {
    pub alpha: f64,
    pub beta: f64,
    /// `beta <= alpha - 1`.
    pub predicted_member: bool,
    /// `(h, q(h))`, coarse to fine.
    pub quotients: Vec<(f64, f64)>,
    /// Least-squares growth of `log2 q` per halving over the finest levels.
    pub growth: f64,
    pub empirically_bounded: bool,
}

impl RegularityCell {
    pub fn agrees(&self) -> bool {
        self.predicted_member == self.empirically_bounded
    }

    pub fn max_quotient(&self) -> f64 {
        self.quotients.iter().map(|q| q.1).fold(0.0, f64::max)
    }
}

/// `f^{(m)}(x)` for `MirroredGamma(alpha, theta)` at `x < 1`.
fn mirrored_derivative(alpha: f64, theta: f64, c: f64, m: u32, x: f64) -> f64 {
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    c * sign * gamma_pdf_derivative(alpha, theta, m, 1.0 - x)
}

pub fn regularity_scan(alpha: f64, beta: f64, theta: f64) -> Result<RegularityCell> {
    let d = TestDensity::mirrored_gamma(alpha, theta)?;
    let c = d.c_norm().expect("mirrored gamma carries its constant");
    let class = HolderClass::new(beta, 1.0)?;
    let m = class.m;
    let quotients: Vec<(f64, f64)> = SCAN_LEVELS
        .map(|k| {
            let h = 2f64.powi(-k);
            let v = mirrored_derivative(alpha, theta, c, m, 1.0 - h);
            (h, v.abs() / h.powf(beta - m as f64))
        })
        .collect();
    if quotients.iter().any(|q| !q.1.is_finite()) {
        return Err(Error::domain("regularity_scan", "non-finite quotient"));
    }
    let tail = &quotients[quotients.len() - GROWTH_LEVELS..];
    // regress log2 q on k = -log2 h
    let pts: Vec<(f64, f64)> = tail.iter().map(|(h, q)| (-h.log2(), q.max(f64::MIN_POSITIVE).log2())).collect();
    let n = pts.len() as f64;
    let mk = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mq = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let growth = pts.iter().map(|p| (p.0 - mk) * (p.1 - mq)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mk) * (p.0 - mk)).sum::<f64>();
    Ok(RegularityCell {
        alpha,
        beta,
        predicted_member: holder_member_mirrored(alpha, beta),
        quotients,
        growth,
        empirically_bounded: growth <= GROWTH_THRESHOLD,
    })
}

/// Every `(alpha, beta)` pair, `alpha` outermost.
pub fn regularity_grid(alphas: &[f64], betas: &[f64], theta: f64) -> Result<Vec<RegularityCell>> {
    let mut out = Vec::with_capacity(alphas.len() * betas.len());
    for &a in alphas {
        for &b in betas {
            out.push(regularity_scan(a, b, theta)?);
        }
    }
    Ok(out)
}

/// Inclusion `Sigma(beta) ⊂ Sigma(beta')` for `beta' < beta`, checked on
/// the scans: whenever a cell is bounded at `beta`, every cell with the
/// same `alpha` and a smaller exponent must be bounded too.
pub fn inclusion_holds(cells: &[RegularityCell]) -> bool {
    cells.iter().all(|hi| {
        !hi.empirically_bounded
            || cells
                .iter()
                .filter(|lo| lo.alpha == hi.alpha && lo.beta < hi.beta)
                .all(|lo| lo.empirically_bounded)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        assert!(regularity_scan(3.0, 2.0, 0.2).unwrap().empirically_bounded);
        let c = regularity_scan(1.5, 1.0, 0.2).unwrap();
        assert!(!c.empirically_bounded && !c.predicted_member);
        assert!((c.growth - 0.5).abs() < 0.01, "{}", c.growth);
        let c = regularity_scan(2.0, 1.0, 0.2).unwrap();
        assert!(c.empirically_bounded && c.predicted_member);
    }

    #[test]
    fn boundary_quotient_tends_to_the_leading_coefficient() {
        // alpha - 1 = beta = 1, m = 0: f(1 - h) / h -> c g'(0+) = c / theta^2
        let (alpha, theta) = (2.0, 0.2);
        let cell = regularity_scan(alpha, 1.0, theta).unwrap();
        let c = TestDensity::mirrored_gamma(alpha, theta).unwrap().c_norm().unwrap();
        let last = cell.quotients.last().unwrap().1;
        assert!((last / (c / (theta * theta)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inclusion_on_grid() {
        let cells = regularity_grid(&[1.5, 2.0, 3.0, 4.0], &[0.25, 0.5, 1.0, 1.5, 2.0], 0.2).unwrap();
        assert!(inclusion_holds(&cells));
        assert!(cells.iter().all(|c| c.agrees()));
    }
}
