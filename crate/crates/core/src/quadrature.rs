//! Gauss–Legendre rules, the graded composite mesh used for all risk
//! integrals over `x`, and a global adaptive Gauss–Kronrod integrator for
//! the inner integrals over the kernel variable `t`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Points per cell of the composite rule.
pub const GL_POINTS: usize = 15;
/// Uniform cells per unit length of the base mesh.
pub const CELLS_PER_UNIT: usize = 40;
/// Ratio between neighbouring graded cells.
pub const GRADING_RATIO: f64 = 1.5;
/// Extra graded cells near each boundary layer.
pub const GRADED_CELLS: usize = 20;
/// Right end of the risk integration window.
pub const WINDOW_END: f64 = 3.0;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

fn gl15() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_POINTS))
}

/// Composite quadrature rule: nodes and weights over a union of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub breakpoints: Vec<f64>,
}

impl Mesh {
    /// 15-point Gauss–Legendre on each cell between consecutive breakpoints.
    pub fn from_breakpoints(breaks: &[f64]) -> Mesh {
        let mut bp: Vec<f64> = breaks.iter().copied().filter(|v| v.is_finite()).collect();
        bp.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bp.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs().max(1.0));
        let (gx, gw) = gl15();
        let cells = bp.len().saturating_sub(1);
        let mut nodes = Vec::with_capacity(cells * GL_POINTS);
        let mut weights = Vec::with_capacity(cells * GL_POINTS);
        for w in bp.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, wt) in gx.iter().zip(gw) {
                nodes.push(mid + half * x);
                weights.push(half * wt);
            }
        }
        Mesh {
            nodes,
            weights,
            breakpoints: bp,
        }
    }

    /// The risk mesh on `[0, 3]` for bandwidth `b`.
    pub fn risk_window(b: f64, extra: &[f64]) -> Mesh {
        Mesh::graded(0.0, WINDOW_END, b, extra)
    }

    /// Graded mesh on `[lo, hi]`: uniform cells of width 1/40, plus 20 cells
    /// graded geometrically toward 0 on `[0, 10 b]` and 10 + 10 cells graded
    /// toward 1 on `[1 - 10 sqrt(b), 1 + 10 sqrt(b)]`. Breakpoints outside
    /// `[lo, hi]` are dropped; `extra` breakpoints are merged in.
    pub fn graded(lo: f64, hi: f64, b: f64, extra: &[f64]) -> Mesh {
        assert!(hi > lo);
        let mut bp = vec![lo, hi];
        let first = (lo * CELLS_PER_UNIT as f64).ceil() as i64;
        let last = (hi * CELLS_PER_UNIT as f64).floor() as i64;
        for k in first..=last {
            bp.push(k as f64 / CELLS_PER_UNIT as f64);
        }
        let near_zero = 10.0 * b;
        bp.extend(graded_points(0.0, near_zero, GRADED_CELLS, false));
        let half_width = 10.0 * b.sqrt();
        bp.extend(graded_points(1.0 - half_width, 1.0, GRADED_CELLS / 2, true));
        bp.extend(graded_points(1.0, 1.0 + half_width, GRADED_CELLS / 2, false));
        bp.extend_from_slice(extra);
        bp.retain(|v| *v >= lo && *v <= hi);
        Mesh::from_breakpoints(&bp)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i g(x_i)` for precomputed values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// Breakpoints of `cells` cells on `[lo, hi]` whose widths grow by the
/// grading ratio away from `lo` (or away from `hi` when `toward_hi`).
fn graded_points(lo: f64, hi: f64, cells: usize, toward_hi: bool) -> Vec<f64> {
    let len = hi - lo;
    if len <= 0.0 || cells == 0 {
        return Vec::new();
    }
    let r = GRADING_RATIO;
    let first = len * (r - 1.0) / (r.powi(cells as i32) - 1.0);
    let mut pts = Vec::with_capacity(cells + 1);
    let mut acc = 0.0;
    let mut width = first;
    pts.push(0.0);
    for _ in 0..cells {
        acc += width;
        width *= r;
        pts.push(acc.min(len));
    }
    pts.into_iter()
        .map(|d| if toward_hi { hi - d } else { lo + d })
        .collect()
}

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1] (nonnegative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Settings of the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Adaptive {
            abs_tol: 1e-11,
            rel_tol: 0.0,
            max_segments: 4000,
        }
    }
}

impl Adaptive {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Adaptive {
            abs_tol,
            ..Adaptive::default()
        }
    }

    /// Global adaptive GK15 over the cells delimited by `breaks` (sorted or
    /// not; duplicates and non-finite values are ignored). The segment with
    /// the largest error estimate is bisected until the total estimate drops
    /// below `max(abs_tol, rel_tol * |integral|)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64], op: &'static str) -> Result<f64> {
        let mut bp: Vec<f64> = breaks.iter().copied().filter(|v| v.is_finite()).collect();
        bp.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bp.dedup();
        if bp.len() < 2 {
            return Ok(0.0);
        }
        let mut heap = BinaryHeap::with_capacity(2 * bp.len());
        let (mut total, mut err) = (0.0, 0.0);
        for w in bp.windows(2) {
            let (value, error) = gk15(&f, w[0], w[1]);
            total += value;
            err += error;
            heap.push(Segment {
                lo: w[0],
                hi: w[1],
                value,
                error,
            });
        }
        loop {
            let tol = self.abs_tol.max(self.rel_tol * total.abs());
            if err <= tol {
                return Ok(total);
            }
            if heap.len() >= self.max_segments {
                return Err(Error::QuadratureNonConvergence {
                    op,
                    tolerance: tol,
                    estimate: err,
                });
            }
            let worst = heap.pop().expect("heap holds at least one segment");
            let mid = 0.5 * (worst.lo + worst.hi);
            if mid <= worst.lo || mid >= worst.hi {
                // cannot bisect further in floating point
                return Err(Error::QuadratureNonConvergence {
                    op,
                    tolerance: tol,
                    estimate: err,
                });
            }
            let (v1, e1) = gk15(&f, worst.lo, mid);
            let (v2, e2) = gk15(&f, mid, worst.hi);
            total += v1 + v2 - worst.value;
            err += e1 + e2 - worst.error;
            heap.push(Segment {
                lo: worst.lo,
                hi: mid,
                value: v1,
                error: e1,
            });
            heap.push(Segment {
                lo: mid,
                hi: worst.hi,
                value: v2,
                error: e2,
            });
        }
    }
}
