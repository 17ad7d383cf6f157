//! Studies that turn the rate claims into numbers: log-log slope fits of
//! Monte Carlo risk and of deterministic bias functionals, the analytic
//! regime map, Hölder-quotient scans and lower-bound predicates.

pub mod bias;
pub mod lower_bounds;
pub mod rates;
pub mod regime;
pub mod regularity;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(log x, log y)` points, with the exponent
/// theory predicts for its slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub theoretical: f64,
    pub points: Vec<(f64, f64)>,
}

impl RateFit {
    /// Fits `log_y = intercept + slope * log_x`; needs at least 4 points.
    pub fn fit(points: Vec<(f64, f64)>, theoretical: f64) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::domain("RateFit", format!("need >= 4 points, got {}", points.len())));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::domain("RateFit", "points must be finite (positive values before the log)"));
        }
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
        if sxx == 0.0 {
            return Err(Error::domain("RateFit", "x values are all equal"));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse: f64 = points
            .iter()
            .map(|p| {
                let r = p.1 - intercept - slope * p.0;
                r * r
            })
            .sum();
        let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
        Ok(RateFit {
            slope,
            intercept,
            r_squared,
            theoretical,
            points,
        })
    }

    /// Fit of `ln y` against `ln x`.
    pub fn from_xy(xs: &[f64], ys: &[f64], theoretical: f64) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::domain("RateFit", "x and y lengths differ"));
        }
        Self::fit(xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect(), theoretical)
    }

    pub fn deviation(&self) -> f64 {
        self.slope - self.theoretical
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > 0.0);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.4)).collect();
        let f = RateFit::from_xy(&xs, &ys, -0.4).unwrap();
        assert!((f.slope + 0.4).abs() < 1e-14);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(f.deviation().abs() < 1e-14);
    }

    #[test]
    fn r_squared_drops_with_noise() {
        let pts = vec![(0.0, 0.0), (1.0, 2.0), (2.0, 1.0), (3.0, 3.0)];
        let f = RateFit::fit(pts, 1.0).unwrap();
        assert!((f.slope - 0.8).abs() < 1e-14);
        assert!(f.r_squared < 0.7 && f.r_squared > 0.0);
    }

    #[test]
    fn needs_four_points() {
        assert!(RateFit::fit(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], 1.0).is_err());
        assert!(RateFit::from_xy(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(0.002, 0.02, 5);
        assert_eq!(v.len(), 5);
        assert!((v[0] - 0.002).abs() < 1e-17 && (v[4] - 0.02).abs() < 1e-16);
        assert!((v[2] - (0.002f64 * 0.02).sqrt()).abs() < 1e-15);
    }
}
