//! Target densities on `[0, 1]`.
//!
//! The raw test densities (uniform, linear tilt, bump perturbation) jump to
//! zero at `x = 1`. Their mollified versions keep the raw values on
//! `[0, 7/8]` and replace the last eighth by a C-infinity transition to 0,
//! compensated by a small bump on `[7/8, 15/16]` so the total mass stays 1.
//! The mirrored truncated gamma family has an explicit regularity `alpha - 1`
//! at the right endpoint and needs no mollification.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::quadrature::Adaptive;
use crate::specfun::{ln_gamma, reg_gamma_upper};

/// Left end of the mollification zone.
pub const MOLLIFY_START: f64 = 7.0 / 8.0;
const PHI_CENTER: f64 = 29.0 / 32.0;
const PHI_HALF_WIDTH: f64 = 1.0 / 32.0;

/// Hölder class `Sigma(beta, L)` with `m` the largest integer below `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderClass {
    pub beta: f64,
    pub l: f64,
    pub m: u32,
}

impl HolderClass {
    pub fn new(beta: f64, l: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::domain("HolderClass", format!("beta = {beta} must be > 0")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::domain("HolderClass", format!("L = {l} must be > 0")));
        }
        let m = (beta.ceil() - 1.0) as u32;
        Ok(HolderClass { beta, l, m })
    }
}

/// Whether the mirrored gamma density `f_{alpha,theta}` lies in some `Sigma(beta, L)`.
pub fn holder_member_mirrored(alpha: f64, beta: f64) -> bool {
    beta <= alpha - 1.0
}

/// `g_{alpha,theta}(s)`, the gamma density with shape `alpha` and scale `theta`.
pub fn gamma_pdf(alpha: f64, theta: f64, s: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite() && theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(
            "gamma_pdf",
            format!("alpha = {alpha}, theta = {theta} must be positive"),
        ));
    }
    Ok(gamma_pdf_unchecked(alpha, theta, s))
}

fn gamma_pdf_unchecked(alpha: f64, theta: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return if s == 0.0 && alpha == 1.0 { 1.0 / theta } else { 0.0 };
    }
    ((alpha - 1.0) * s.ln() - s / theta - alpha * theta.ln() - ln_gamma(alpha)).exp()
}

/// `k`-th derivative of `g_{alpha,theta}` at `s > 0`:
/// `g^{(k)}(s) = C e^{-s/theta} sum_j binom(k,j) (alpha-1)_j s^{alpha-1-j} (-1/theta)^{k-j}`,
/// with `(alpha-1)_j` the falling factorial.
pub fn gamma_pdf_derivative(alpha: f64, theta: f64, k: u32, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let ln_c = -alpha * theta.ln() - ln_gamma(alpha);
    let mut sum = 0.0;
    let mut binom = 1.0;
    let mut falling = 1.0;
    for j in 0..=k {
        if j > 0 {
            binom *= (k - j + 1) as f64 / j as f64;
            falling *= alpha - 1.0 - (j - 1) as f64;
        }
        let sign = if (k - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        let mag = (ln_c - s / theta + (alpha - 1.0 - j as f64) * s.ln() - (k - j) as f64 * theta.ln()).exp();
        sum += binom * falling * sign * mag;
    }
    sum
}

/// `psi(u) = (1 - u^2)^3` on `[-1, 1]`, zero outside.
pub fn psi(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let v = 1.0 - u * u;
        v * v * v
    }
}

/// `epsilon(L) = min{1/2, (L - 1)/2}`.
pub fn tilt_epsilon(l: f64) -> f64 {
    (0.5f64).min(0.5 * (l - 1.0))
}

/// Which density, with its defining parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    MolliUniform,
    MolliLinear { l: f64 },
    MirroredGamma { alpha: f64, theta: f64 },
    Bump { beta: f64, b: f64, l: f64 },
    RawUniform,
    RawLinear { l: f64 },
    RawBump { beta: f64, b: f64, l: f64 },
}

/// The unmollified shape on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
enum Raw {
    Uniform,
    Linear { eps: f64 },
    Mirrored { alpha: f64, theta: f64, c_norm: f64 },
    Bump(BumpShape),
}

/// Bump perturbation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpShape {
    pub n_pairs: usize,
    /// Half-width `3 sqrt(b)` of each bump.
    pub h: f64,
    /// Height `L_beta (3 sqrt(b))^beta`.
    pub amplitude: f64,
    pub l_beta: f64,
}

impl BumpShape {
    /// Centre `t^{(k)} = 1/4 + 3 sqrt(b) (2k - 1)`, `k = 1..2N`.
    pub fn center(&self, k: usize) -> f64 {
        0.25 + self.h * (2 * k - 1) as f64
    }

    fn value(&self, x: f64) -> f64 {
        let j = ((x - 0.25) / (2.0 * self.h)).floor();
        if j < 0.0 || j >= (2 * self.n_pairs) as f64 {
            return 1.0;
        }
        let k = j as usize + 1;
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        1.0 + sign * self.amplitude * psi((x - self.center(k)) / self.h)
    }
}

impl Raw {
    fn value(&self, x: f64) -> f64 {
        match self {
            Raw::Uniform => 1.0,
            Raw::Linear { eps } => 1.0 + eps * (2.0 * x - 1.0),
            Raw::Mirrored { alpha, theta, c_norm } => c_norm * gamma_pdf_unchecked(*alpha, *theta, 1.0 - x),
            Raw::Bump(s) => s.value(x),
        }
    }
}

/// `B(t) = exp(-1/t)` for `t > 0`, else 0.
fn flat(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`.
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let (p, q) = (flat(t), flat(1.0 - t));
        p / (p + q)
    }
}

/// Transition weight: 1 on `[0, 7/8]`, `S(8(1 - x))` on `(7/8, 1)`, 0 from 1 on.
pub fn transition_weight(x: f64) -> f64 {
    if x <= MOLLIFY_START {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        smoothstep(8.0 * (1.0 - x))
    }
}

fn phi_unnormalized(x: f64) -> f64 {
    let v = (x - PHI_CENTER) / PHI_HALF_WIDTH;
    if v.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - v * v)).exp()
    }
}

fn phi_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        let lo = PHI_CENTER - PHI_HALF_WIDTH;
        let hi = PHI_CENTER + PHI_HALF_WIDTH;
        Adaptive::with_abs_tol(1e-17)
            .integrate(phi_unnormalized, &[lo, PHI_CENTER, hi], "mollifier bump mass")
            .expect("smooth bump integrates")
    })
}

/// Unit-mass compensation bump supported on `[7/8, 15/16]`.
pub fn compensation_bump(x: f64) -> f64 {
    phi_unnormalized(x) / phi_mass()
}

/// A target density with its pdf, envelope and sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct TestDensity {
    kind: DensityKind,
    raw: Raw,
    /// Compensation mass `m = int_{7/8}^1 raw (1 - w)` when mollified.
    mollifier_mass: Option<f64>,
    sup_norm: f64,
}

impl TestDensity {
    pub fn raw_uniform() -> Self {
        Self::finish(DensityKind::RawUniform, Raw::Uniform, None).expect("uniform is valid")
    }

    pub fn molli_uniform() -> Self {
        Self::mollify(Self::raw_uniform()).expect("uniform mollifies")
    }

    /// Raw linear tilt `f_3(x) = 1 + eps (2x - 1)` with `eps = eps(L)`.
    pub fn raw_linear(l: f64) -> Result<Self> {
        if !(l.is_finite() && l > 1.0) {
            return Err(Error::domain("linear_tilt", format!("L = {l} must be > 1")));
        }
        Self::finish(
            DensityKind::RawLinear { l },
            Raw::Linear { eps: tilt_epsilon(l) },
            None,
        )
    }

    pub fn molli_linear(l: f64) -> Result<Self> {
        Self::mollify(Self::raw_linear(l)?)
    }

    /// `c_{alpha,theta} g_{alpha,theta}(1 - x)` on `[0, 1]`.
    pub fn mirrored_gamma(alpha: f64, theta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && theta > 0.0 && theta.is_finite()) {
            return Err(Error::domain(
                "mirrored_gamma",
                format!("alpha = {alpha}, theta = {theta} must be positive"),
            ));
        }
        let mass = 1.0 - reg_gamma_upper(alpha, 1.0 / theta)?;
        let c_norm = 1.0 / mass;
        Self::finish(
            DensityKind::MirroredGamma { alpha, theta },
            Raw::Mirrored { alpha, theta, c_norm },
            None,
        )
    }

    /// Raw bump perturbation `f_{beta,b}` of the uniform density.
    pub fn raw_bump(beta: f64, b: f64, l: f64) -> Result<Self> {
        let shape = bump_shape(beta, b, l)?;
        Self::finish(DensityKind::RawBump { beta, b, l }, Raw::Bump(shape), None)
    }

    pub fn bump(beta: f64, b: f64, l: f64) -> Result<Self> {
        let raw = Self::raw_bump(beta, b, l)?;
        Self::mollify(raw)
    }

    /// Smooth version: `raw w + m phi` (see module docs). Mirrored gamma
    /// densities and already-mollified densities are rejected.
    pub fn mollify(raw: TestDensity) -> Result<Self> {
        let kind = match raw.kind {
            DensityKind::RawUniform => DensityKind::MolliUniform,
            DensityKind::RawLinear { l } => DensityKind::MolliLinear { l },
            DensityKind::RawBump { beta, b, l } => DensityKind::Bump { beta, b, l },
            ref other => {
                return Err(Error::InvalidSpec(format!("{other:?} is not a raw test density")));
            }
        };
        let shape = raw.raw;
        let mass = Adaptive::with_abs_tol(1e-15).integrate(
            |x| shape.value(x) * (1.0 - transition_weight(x)),
            &[MOLLIFY_START, 0.9, PHI_CENTER, 0.9375, 0.96875, 1.0],
            "mollifier compensation mass",
        )?;
        if mass < 0.0 {
            return Err(Error::NegativeMass { mass });
        }
        Self::finish(kind, shape, Some(mass))
    }

    fn finish(kind: DensityKind, raw: Raw, mollifier_mass: Option<f64>) -> Result<Self> {
        let mut d = TestDensity {
            kind,
            raw,
            mollifier_mass,
            sup_norm: f64::NAN,
        };
        d.sup_norm = d.scan_sup();
        Ok(d)
    }

    fn scan_sup(&self) -> f64 {
        let analytic = match &self.raw {
            Raw::Uniform => 1.0,
            Raw::Linear { eps } => 1.0 + eps,
            Raw::Bump(s) => 1.0 + s.amplitude,
            Raw::Mirrored { alpha, theta, c_norm } => {
                if *alpha < 1.0 {
                    return f64::INFINITY;
                }
                let mode = ((alpha - 1.0) * theta).min(1.0);
                c_norm * gamma_pdf_unchecked(*alpha, *theta, mode)
            }
        };
        if self.mollifier_mass.is_none() {
            return analytic;
        }
        let steps = 20_000;
        let mut best: f64 = 0.0;
        for i in 0..=steps {
            let x = MOLLIFY_START + (1.0 - MOLLIFY_START) * i as f64 / steps as f64;
            best = best.max(self.pdf(x));
        }
        best.max(analytic)
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn is_mollified(&self) -> bool {
        self.mollifier_mass.is_some()
    }

    /// Compensation mass of the mollifier, if any.
    pub fn mollifier_mass(&self) -> Option<f64> {
        self.mollifier_mass
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn support_end(&self) -> f64 {
        1.0
    }

    /// Normalizing constant of the mirrored gamma family.
    pub fn c_norm(&self) -> Option<f64> {
        match self.raw {
            Raw::Mirrored { c_norm, .. } => Some(c_norm),
            _ => None,
        }
    }

    pub fn bump_shape(&self) -> Option<&BumpShape> {
        match &self.raw {
            Raw::Bump(s) => Some(s),
            _ => None,
        }
    }

    /// The unmollified value on `[0, 1]` (0 elsewhere).
    pub fn raw_pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        self.raw.value(x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self.mollifier_mass {
            None => self.raw.value(x),
            Some(m) => {
                if x <= MOLLIFY_START {
                    self.raw.value(x)
                } else {
                    self.raw.value(x) * transition_weight(x) + m * compensation_bump(x)
                }
            }
        }
    }

    /// Points where the pdf or one of its low derivatives is not smooth, or
    /// where its shape changes quickly. Always includes 0 and 1.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![0.0, 1.0];
        if self.mollifier_mass.is_some() {
            v.extend([MOLLIFY_START, PHI_CENTER, 15.0 / 16.0, 0.96875]);
        }
        if let Raw::Bump(s) = &self.raw {
            v.push(0.25);
            for k in 1..=2 * s.n_pairs {
                let c = s.center(k);
                v.push(c);
                v.push(c + s.h);
            }
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    }

    /// `n` iid draws by rejection from the uniform proposal on `[0, 1]`
    /// under the envelope `1.01 sup_norm`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        self.sample_into(n, rng, &mut out)?;
        Ok(out)
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<f64>) -> Result<()> {
        if !self.sup_norm.is_finite() {
            return Err(Error::domain("sample", "density is unbounded; rejection sampling unavailable"));
        }
        let envelope = 1.01 * self.sup_norm;
        out.clear();
        while out.len() < n {
            let x: f64 = rng.random();
            let u: f64 = rng.random::<f64>() * envelope;
            let fx = self.pdf(x);
            if fx > envelope {
                return Err(Error::EnvelopeViolation { x, value: fx, envelope });
            }
            if u < fx {
                out.push(x);
            }
        }
        Ok(())
    }

    pub fn to_spec(&self) -> DensitySpec {
        let mut params = Map::new();
        let mut put = |k: &str, v: f64| {
            params.insert(k.to_string(), Value::from(v));
        };
        let kind = match self.kind {
            DensityKind::MolliUniform => "MolliUniform",
            DensityKind::RawUniform => "RawUniform",
            DensityKind::MolliLinear { l } => {
                put("L", l);
                "MolliLinear"
            }
            DensityKind::RawLinear { l } => {
                put("L", l);
                "RawLinear"
            }
            DensityKind::MirroredGamma { alpha, theta } => {
                put("alpha", alpha);
                put("theta", theta);
                "MirroredGamma"
            }
            DensityKind::Bump { beta, b, l } | DensityKind::RawBump { beta, b, l } => {
                put("beta", beta);
                put("b", b);
                put("L", l);
                if matches!(self.kind, DensityKind::Bump { .. }) {
                    "Bump"
                } else {
                    "RawBump"
                }
            }
        };
        DensitySpec {
            kind: kind.to_string(),
            params,
        }
    }

    pub fn from_spec(spec: &DensitySpec) -> Result<Self> {
        let get = |name: &str, default: Option<f64>| -> Result<f64> {
            match spec.params.get(name) {
                Some(v) => v
                    .as_f64()
                    .ok_or_else(|| Error::InvalidSpec(format!("parameter {name} of {} must be a number", spec.kind))),
                None => default.ok_or_else(|| Error::InvalidSpec(format!("{} requires parameter {name}", spec.kind))),
            }
        };
        let allowed: &[&str] = match spec.kind.as_str() {
            "MolliUniform" | "RawUniform" => &[],
            "MolliLinear" | "RawLinear" => &["L"],
            "MirroredGamma" => &["alpha", "theta"],
            "Bump" | "RawBump" => &["beta", "b", "L"],
            other => return Err(Error::InvalidSpec(format!("unknown density kind {other:?}"))),
        };
        if let Some(k) = spec.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidSpec(format!("unexpected parameter {k:?} for {}", spec.kind)));
        }
        match spec.kind.as_str() {
            "MolliUniform" => Ok(Self::molli_uniform()),
            "RawUniform" => Ok(Self::raw_uniform()),
            "MolliLinear" => Self::molli_linear(get("L", Some(2.0))?),
            "RawLinear" => Self::raw_linear(get("L", Some(2.0))?),
            "MirroredGamma" => Self::mirrored_gamma(get("alpha", None)?, get("theta", None)?),
            "Bump" => Self::bump(get("beta", None)?, get("b", None)?, get("L", Some(2.0))?),
            "RawBump" => Self::raw_bump(get("beta", None)?, get("b", None)?, get("L", Some(2.0))?),
            _ => unreachable!(),
        }
    }
}

/// JSON form `{"kind": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub kind: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl DensitySpec {
    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::InvalidSpec(e.to_string()))
    }
}

fn bump_shape(beta: f64, b: f64, l: f64) -> Result<BumpShape> {
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::domain("bump_density", format!("beta = {beta} must lie in (0, 2]")));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::domain("bump_density", format!("b = {b} must lie in (0, 1)")));
    }
    if !(l.is_finite() && l > 1.0) {
        return Err(Error::domain("bump_density", format!("L = {l} must be > 1")));
    }
    let sb = b.sqrt();
    let h = 3.0 * sb;
    let n_pairs = (1.0 / (24.0 * sb)).ceil() as usize;
    let l_beta = l / 16.0;
    let amplitude = l_beta * h.powf(beta);
    if amplitude > 0.5 {
        return Err(Error::BandwidthTooLarge {
            b,
            detail: format!("bump height {amplitude} exceeds 1/2"),
        });
    }
    let right = 0.25 + 12.0 * n_pairs as f64 * sb;
    if right > MOLLIFY_START {
        return Err(Error::BandwidthTooLarge {
            b,
            detail: format!("{} bumps end at {right}, beyond 7/8", 2 * n_pairs),
        });
    }
    Ok(BumpShape {
        n_pairs,
        h,
        amplitude,
        l_beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Mesh;

    fn mass(d: &TestDensity) -> f64 {
        let mut br = d.breakpoints();
        for i in 0..=64 {
            br.push(i as f64 / 64.0);
        }
        Adaptive::with_abs_tol(1e-13)
            .integrate(|x| d.pdf(x), &br, "test")
            .unwrap()
    }

    fn all_densities() -> Vec<TestDensity> {
        vec![
            TestDensity::raw_uniform(),
            TestDensity::molli_uniform(),
            TestDensity::raw_linear(2.0).unwrap(),
            TestDensity::molli_linear(2.0).unwrap(),
            TestDensity::molli_linear(1.5).unwrap(),
            TestDensity::mirrored_gamma(3.0, 0.2).unwrap(),
            TestDensity::mirrored_gamma(4.0, 0.2).unwrap(),
            TestDensity::mirrored_gamma(1.0, 0.5).unwrap(),
            TestDensity::raw_bump(2.0, 0.002, 2.0).unwrap(),
            TestDensity::bump(1.0, 0.0005, 2.0).unwrap(),
            TestDensity::bump(2.0, 0.0002, 2.0).unwrap(),
        ]
    }

    #[test]
    fn gamma_pdf_values() {
        let v = gamma_pdf(1.0, 0.2, 0.1).unwrap();
        assert!((v - 5.0 * (-0.5f64).exp()).abs() < 1e-14);
        assert_eq!(gamma_pdf(2.0, 0.2, 0.0).unwrap(), 0.0);
        assert!(gamma_pdf(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gamma_derivatives_match_finite_differences() {
        for &(alpha, theta) in &[(3.0, 0.2), (2.5, 0.5), (4.0, 0.2)] {
            for &s in &[0.1, 0.4, 0.9] {
                let h = 1e-5;
                for k in 0..3u32 {
                    let fd = (gamma_pdf_derivative(alpha, theta, k, s + h)
                        - gamma_pdf_derivative(alpha, theta, k, s - h))
                        / (2.0 * h);
                    let exact = gamma_pdf_derivative(alpha, theta, k + 1, s);
                    assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "k={k} s={s}");
                }
                let g0 = gamma_pdf_derivative(alpha, theta, 0, s);
                assert!((g0 - gamma_pdf(alpha, theta, s).unwrap()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn every_density_has_unit_mass_and_is_nonnegative() {
        for d in all_densities() {
            let m = mass(&d);
            assert!((m - 1.0).abs() < 1e-9, "{:?}: {m}", d.kind());
            for i in 0..=100_000 {
                assert!(d.pdf(i as f64 * 1e-5) >= 0.0);
            }
        }
    }

    #[test]
    fn mollified_equals_raw_up_to_seven_eighths() {
        for d in all_densities().into_iter().filter(|d| d.is_mollified()) {
            for i in 0..=7000 {
                let x = i as f64 / 8000.0;
                assert_eq!(d.pdf(x), d.raw_pdf(x));
            }
            assert_eq!(d.pdf(MOLLIFY_START), d.raw_pdf(MOLLIFY_START));
            assert_eq!(d.pdf(1.0), 0.0);
        }
    }

    #[test]
    fn mollified_derivatives_vanish_at_one() {
        let d = TestDensity::molli_uniform();
        let h = 1e-5;
        let x = 1.0 - 1e-4;
        let d1 = (d.pdf(x + h) - d.pdf(x - h)) / (2.0 * h);
        assert!(d1.abs() < 1e-2);
        // finite differences of orders 0..4 shrink as x -> 1
        for order in 0..=4 {
            let mut prev = f64::INFINITY;
            for k in 2..=5 {
                let x = 1.0 - 10f64.powi(-k);
                let step = 10f64.powi(-k - 1);
                let mut fd = 0.0;
                let mut c = 1.0;
                for j in 0..=order {
                    fd += c * d.pdf(x - j as f64 * step);
                    c *= -((order - j) as f64) / (j as f64 + 1.0);
                }
                let v = (fd / step.powi(order)).abs();
                assert!(v <= prev + 1e-12, "order {order} at {x}: {v} vs {prev}");
                prev = v;
            }
            assert!(prev < 1e-6, "order {order}: {prev}");
        }
    }

    #[test]
    fn compensation_mass_positive() {
        for d in all_densities().into_iter().filter(|d| d.is_mollified()) {
            assert!(d.mollifier_mass().unwrap() > 0.0);
        }
        let lin = TestDensity::molli_linear(2.0).unwrap();
        assert!((mass(&lin) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mirrored_normalizer() {
        let theta = 0.3;
        let d = TestDensity::mirrored_gamma(1.0, theta).unwrap();
        let c = d.c_norm().unwrap();
        assert!((c - 1.0 / (1.0 - (-1.0 / theta).exp())).abs() < 1e-13);
        let d = TestDensity::mirrored_gamma(3.0, 0.2).unwrap();
        let c = d.c_norm().unwrap();
        assert!(c > 1.0);
        let q = Adaptive::with_abs_tol(1e-15)
            .integrate(|s| gamma_pdf(3.0, 0.2, s).unwrap(), &[0.0, 0.25, 0.5, 1.0], "test")
            .unwrap();
        assert!((c * q - 1.0).abs() < 1e-9);
        assert_eq!(d.pdf(1.0), 0.0);
        let h = 1e-6;
        assert!(((d.pdf(1.0) - d.pdf(1.0 - h)) / h).abs() < 1e-3);
    }

    #[test]
    fn holder_predicate() {
        assert!(holder_member_mirrored(3.0, 2.0));
        assert!(!holder_member_mirrored(1.5, 1.0));
        assert!(holder_member_mirrored(2.0, 1.0));
        let h = HolderClass::new(2.0, 1.0).unwrap();
        assert_eq!(h.m, 1);
        assert_eq!(HolderClass::new(0.5, 1.0).unwrap().m, 0);
        assert_eq!(HolderClass::new(1.0, 1.0).unwrap().m, 0);
        assert!(HolderClass::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn linear_tilt_values() {
        let d = TestDensity::raw_linear(2.0).unwrap();
        assert_eq!(d.pdf(0.0), 0.5);
        assert_eq!(d.pdf(1.0), 1.5);
        assert_eq!(tilt_epsilon(1.5), 0.25);
        assert!(TestDensity::raw_linear(1.0).is_err());
    }

    #[test]
    fn bump_geometry() {
        let (beta, b, l) = (2.0, 0.0005, 2.0);
        let d = TestDensity::raw_bump(beta, b, l).unwrap();
        let s = d.bump_shape().unwrap().clone();
        assert_eq!(s.n_pairs, (1.0 / (24.0 * b.sqrt())).ceil() as usize);
        let height = l / 16.0 * (3.0 * b.sqrt()).powf(beta);
        for k in 1..=2 * s.n_pairs {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((d.pdf(s.center(k)) - (1.0 + sign * height)).abs() < 1e-14);
        }
        assert!(s.center(2 * s.n_pairs) + s.h <= MOLLIFY_START);
        for i in 0..=10_000 {
            assert!(d.pdf(i as f64 / 10_000.0) >= 0.5);
        }
        assert!(1.0 - psi(0.1) <= 0.03);
        assert!((1.0 - psi(0.1) - 0.029_701).abs() < 1e-12);
    }

    #[test]
    fn bump_rejects_large_bandwidth() {
        assert!(matches!(
            TestDensity::raw_bump(2.0, 0.01, 2.0),
            Err(Error::BandwidthTooLarge { .. })
        ));
        assert!(matches!(
            TestDensity::raw_bump(1.0, 0.0009, 2.0),
            Err(Error::BandwidthTooLarge { .. })
        ));
        assert!(TestDensity::raw_bump(3.0, 0.001, 2.0).is_err());
    }

    #[test]
    fn sup_norm_dominates_pdf() {
        for d in all_densities() {
            let s = d.sup_norm();
            for i in 0..=200_000 {
                assert!(d.pdf(i as f64 / 200_000.0) <= s * 1.001);
            }
        }
        let s = TestDensity::molli_uniform().sup_norm();
        assert!(s > 2.0 && s < 3.0, "{s}");
    }

    #[test]
    fn spec_round_trip() {
        for d in all_densities() {
            let spec = d.to_spec();
            let json = serde_json::to_string(&spec).unwrap();
            let back = TestDensity::from_spec(&DensitySpec::parse(&json).unwrap()).unwrap();
            assert_eq!(back, d);
        }
        let spec = DensitySpec::parse(r#"{"kind":"MirroredGamma","params":{"alpha":4,"theta":0.2}}"#).unwrap();
        assert!(TestDensity::from_spec(&spec).is_ok());
        let bad = DensitySpec::parse(r#"{"kind":"Nope"}"#).unwrap();
        assert!(TestDensity::from_spec(&bad).is_err());
        let bad = DensitySpec::parse(r#"{"kind":"MolliLinear","params":{"eps":0.1}}"#).unwrap();
        assert!(TestDensity::from_spec(&bad).is_err());
    }

    #[test]
    fn mesh_mass_matches_adaptive() {
        let d = TestDensity::molli_linear(2.0).unwrap();
        let mesh = Mesh::graded(0.0, 1.0, 0.01, &d.breakpoints());
        assert!((mesh.integrate(|x| d.pdf(x)) - 1.0).abs() < 1e-9);
    }
}
