//! Command-line surface. The same types serialize into the meta sidecar,
//! so a sidecar's `config` deserializes back into a runnable [`RunConfig`].

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gkde::densities::{DensitySpec, TestDensity};
use gkde::experiments::regime::check_cell;
use gkde::Error;

#[derive(Debug, Parser)]
#[command(name = "gkde", version, about = "Gamma kernel density estimation and rate experiments")]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, env = "GKDE_SEED", default_value_t = 0, global = true)]
    pub seed: u64,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// CSV destination (default: stdout). The sidecar goes to `<output>.meta.json`.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Explicit sidecar path; needed to get a sidecar when writing to stdout.
    #[arg(long, global = true)]
    pub meta: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn into_config(self) -> (RunConfig, Option<PathBuf>) {
        let meta = self.meta.or_else(|| {
            self.output.as_ref().map(|o| {
                let mut s = o.clone().into_os_string();
                s.push(".meta.json");
                PathBuf::from(s)
            })
        });
        (
            RunConfig {
                command: self.command,
                seed: self.seed,
                threads: self.threads,
                output: self.output,
            },
            meta,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

/// A density given as `{"kind": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DensityArg(pub DensitySpec);

impl FromStr for DensityArg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        DensitySpec::parse(s).map(DensityArg)
    }
}

impl DensityArg {
    pub fn build(&self) -> gkde::Result<TestDensity> {
        TestDensity::from_spec(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Estimate a density from a sample file.
    Estimate(EstimateArgs),
    /// Tabulate a test density.
    DensityEval(DensityEvalArgs),
    /// Draw a sample from a test density.
    Sample(SampleArgs),
    /// Monte Carlo L^p risk on a (b, p) grid.
    Risk(RiskArgs),
    /// Risk along n under the bandwidth rule, with a slope fit.
    Rate(RateArgs),
    /// Risk along n at the per-n best bandwidth.
    OracleRate(OracleRateArgs),
    /// Bias of the unmollified uniform density against b.
    Endpoint(EndpointArgs),
    /// Bias floors of the linear-tilt and bump densities.
    BiasFloor(BiasFloorArgs),
    /// Risk along n at a frozen bandwidth.
    Stagnant(StagnantArgs),
    /// Lower-bound predicates.
    LowerBounds(LowerBoundsArgs),
    /// Minimax / non-minimax classification of (p, beta).
    RegimeMap(RegimeMapArgs),
    /// Hölder-quotient scan of mirrored gamma densities.
    RegularityScan(RegularityArgs),
    /// Kernel envelopes and the squared-kernel identity on an (x, b) grid.
    BoundsCheck(BoundsCheckArgs),
}

const POW2_8_14: &str = "256,512,1024,2048,4096,8192,16384";

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub b: f64,
    /// Newline-delimited sample values.
    #[arg(long)]
    pub input: PathBuf,
    /// Evaluation points (default: the risk quadrature nodes on [0, 3]).
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DensityEvalArgs {
    #[arg(long)]
    pub density: DensityArg,
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Equispaced points on [0, 1] when no grid is given.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub density: DensityArg,
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RiskArgs {
    #[arg(long)]
    pub density: DensityArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub b: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RateArgs {
    #[arg(long)]
    pub density: DensityArg,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, value_delimiter = ',', default_value = POW2_8_14)]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OracleRateArgs {
    #[arg(long)]
    pub density: DensityArg,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, value_delimiter = ',', default_value = "2,8")]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = POW2_8_14)]
    pub n_grid: Vec<usize>,
    /// Bandwidth window centre is `center_c * n^{-2/(2 beta + 1)}`.
    #[arg(long, default_value_t = 0.4)]
    pub center_c: f64,
    #[arg(long, default_value_t = 1.25)]
    pub decades: f64,
    #[arg(long, default_value_t = 12)]
    pub per_decade: usize,
    #[arg(long, default_value_t = 64)]
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EndpointArgs {
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.02,0.01,0.005,0.002")]
    pub b_grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasFamily {
    /// MolliLinear(L); theoretical slope 1.
    Linear,
    /// Mollified bump density rebuilt per b; theoretical slope beta/2.
    Bump,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BiasFloorArgs {
    #[arg(long, value_enum)]
    pub family: BiasFamily,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub l: f64,
    /// Defaults: 0.02,0.01,0.005,0.002 (linear); N sqrt(b) = 1/24 for N = 1..8 (bump).
    #[arg(long, value_delimiter = ',')]
    pub b_grid: Option<Vec<f64>>,
    /// `full`, `interval:LO:HI` or `cores:EPS`.
    #[arg(long, default_value = "full")]
    pub region: String,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct StagnantArgs {
    #[arg(long)]
    pub density: DensityArg,
    #[arg(long, default_value_t = 0.1)]
    pub b: f64,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, value_delimiter = ',', default_value = POW2_8_14)]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerCheck {
    /// P(xi_x > 1) against 2 exp(-(1 - ln 2)/(2b)) on x in [0, 1/2].
    Chernoff,
    /// min over x in [1/4, 5/6] of sqrt(b) K_b(x, x + 5/2 sqrt(b)).
    KLocal,
    /// n Var f_hat(x) sqrt(b x) on x in [b, 1/2] for MolliUniform.
    Variance,
    /// Integrated variance floor against I(b, p) / (n sqrt(b))^{p/2}.
    VarFloor,
    /// L^1 fluctuation on [1/4, 1/2] times sqrt(n) b^{1/4}.
    Fluctuation,
    /// Analytic rare-event bound for b = s^2 / n^2.
    RareEvent,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LowerBoundsArgs {
    #[arg(long, value_enum)]
    pub check: LowerCheck,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.02")]
    pub b_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1024,4096")]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 6.0)]
    pub p: f64,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 21)]
    pub x_points: usize,
    /// Pairs with n sqrt(b) below this are skipped by `fluctuation`.
    #[arg(long, default_value_t = 10.0)]
    pub min_s: f64,
    /// `s = n sqrt(b)` for `rare-event`.
    #[arg(long, default_value_t = 2.0)]
    pub s: f64,
    #[arg(long, default_value_t = gkde::experiments::lower_bounds::DEFAULT_C0)]
    pub c0: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RegimeMapArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,1.5,2,2.5,3,3.25,3.5,3.75,4,5,6,8")]
    pub p_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1,1.5,2,2.5,3,4")]
    pub beta_grid: Vec<f64>,
    /// Analytic classification only (the default).
    #[arg(long, conflicts_with = "fitted")]
    pub analytic: bool,
    /// Attach oracle-bandwidth slopes at reduced resolution.
    #[arg(long)]
    pub fitted: bool,
    #[arg(long, value_delimiter = ',', default_value = "256,512,1024,2048")]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RegularityArgs {
    #[arg(long, value_delimiter = ',', default_value = "1.5,2,3,4")]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BoundsCheckArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.1,0.25,0.5,1,2,3,5")]
    pub x_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.02,0.01,0.001")]
    pub b_grid: Vec<f64>,
}

/// A violated precondition, reported before any computation.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn fail<T>(msg: impl Into<String>) -> Result<T, Invalid> {
    Err(Invalid(msg.into()))
}

fn bandwidth(name: &str, b: f64) -> Result<(), Invalid> {
    if b > 0.0 && b <= 1.0 {
        Ok(())
    } else {
        fail(format!("{name} = {b} must lie in (0, 1]"))
    }
}

fn bandwidths(name: &str, bs: &[f64], min_len: usize) -> Result<(), Invalid> {
    if bs.len() < min_len {
        return fail(format!("{name} needs at least {min_len} values"));
    }
    bs.iter().try_for_each(|&b| bandwidth(name, b))
}

fn exponent(name: &str, p: f64) -> Result<(), Invalid> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        fail(format!("{name} = {p} must be finite and >= 1"))
    }
}

fn positive(name: &str, v: f64) -> Result<(), Invalid> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        fail(format!("{name} = {v} must be finite and > 0"))
    }
}

fn reps(r: usize) -> Result<(), Invalid> {
    if r >= 2 {
        Ok(())
    } else {
        fail(format!("reps = {r} must be >= 2"))
    }
}

fn n_grid(ns: &[usize], min_len: usize) -> Result<(), Invalid> {
    if ns.len() < min_len {
        return fail(format!("n-grid needs at least {min_len} values"));
    }
    if ns[0] == 0 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return fail("n-grid must be positive and strictly increasing");
    }
    Ok(())
}

fn density(d: &DensityArg) -> Result<TestDensity, Invalid> {
    d.build().map_err(|e| Invalid(e.to_string()))
}

fn points(name: &str, xs: &[f64]) -> Result<(), Invalid> {
    if xs.iter().all(|x| x.is_finite() && *x >= 0.0) {
        Ok(())
    } else {
        fail(format!("{name} values must be finite and >= 0"))
    }
}

/// Parsed `--region`.
pub fn parse_region(s: &str) -> Result<gkde::experiments::bias::BiasRegion, Invalid> {
    use gkde::experiments::bias::BiasRegion;
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| Invalid(format!("region: {t:?} is not a number")));
    match parts.as_slice() {
        ["full"] => Ok(BiasRegion::Full),
        ["interval", lo, hi] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            if !(0.0 <= lo && lo < hi && hi <= 3.0) {
                return fail(format!("region interval [{lo}, {hi}] must lie inside [0, 3]"));
            }
            Ok(BiasRegion::Interval { lo, hi })
        }
        ["cores", eps] => {
            let eps = num(eps)?;
            if !(eps > 0.0 && eps <= 0.5) {
                return fail(format!("region cores eps = {eps} must lie in (0, 1/2]"));
            }
            Ok(BiasRegion::BumpCores { eps })
        }
        _ => fail(format!("region {s:?}: expected full, interval:LO:HI or cores:EPS")),
    }
}

impl RunConfig {
    /// Checks every precondition of the invoked operation.
    pub fn validate(&self) -> Result<(), Invalid> {
        if self.threads == Some(0) {
            return fail("threads must be >= 1");
        }
        match &self.command {
            Command::Estimate(a) => {
                bandwidth("b", a.b)?;
                if let Some(g) = &a.grid {
                    points("grid", g)?;
                    if g.windows(2).any(|w| w[1] <= w[0]) {
                        return fail("grid must be strictly increasing");
                    }
                }
                if !a.input.is_file() {
                    return fail(format!("input {} is not a readable file", a.input.display()));
                }
            }
            Command::DensityEval(a) => {
                density(&a.density)?;
                match &a.grid {
                    Some(g) => points("grid", g)?,
                    None if a.points < 2 => return fail("points must be >= 2"),
                    None => {}
                }
            }
            Command::Sample(a) => {
                density(&a.density)?;
                if a.n == 0 {
                    return fail("n must be >= 1");
                }
            }
            Command::Risk(a) => {
                density(&a.density)?;
                if a.n == 0 {
                    return fail("n must be >= 1");
                }
                bandwidths("b", &a.b, 1)?;
                a.p.iter().try_for_each(|&p| exponent("p", p))?;
                reps(a.reps)?;
            }
            Command::Rate(a) => {
                density(&a.density)?;
                positive("beta", a.beta)?;
                exponent("p", a.p)?;
                positive("c", a.c)?;
                n_grid(&a.n_grid, 4)?;
                reps(a.reps)?;
            }
            Command::OracleRate(a) => {
                density(&a.density)?;
                positive("beta", a.beta)?;
                a.p.iter().try_for_each(|&p| exponent("p", p))?;
                positive("center-c", a.center_c)?;
                positive("decades", a.decades)?;
                n_grid(&a.n_grid, 4)?;
                reps(a.reps)?;
                if (a.per_decade as f64 * a.decades).round() < 7.0 {
                    return fail("the bandwidth grid needs at least 8 points (per-decade * decades >= 7)");
                }
                let half = 10f64.powf(a.decades / 2.0);
                for &n in &a.n_grid {
                    let top = a.center_c * (n as f64).powf(-2.0 / (2.0 * a.beta + 1.0)) * half;
                    bandwidth("largest oracle bandwidth", top)?;
                }
            }
            Command::Endpoint(a) => {
                exponent("p", a.p)?;
                bandwidths("b-grid", &a.b_grid, 4)?;
            }
            Command::BiasFloor(a) => {
                parse_region(&a.region)?;
                if a.family == BiasFamily::Bump && !(a.beta > 0.0 && a.beta <= 2.0) {
                    return fail(format!("beta = {} must lie in (0, 2]", a.beta));
                }
                if !(a.l > 1.0 && a.l.is_finite()) {
                    return fail(format!("L = {} must be > 1", a.l));
                }
                if let Some(g) = &a.b_grid {
                    bandwidths("b-grid", g, 4)?;
                    if a.family == BiasFamily::Bump {
                        for &b in g {
                            TestDensity::raw_bump(a.beta, b, a.l).map_err(|e| Invalid(e.to_string()))?;
                        }
                    }
                }
            }
            Command::Stagnant(a) => {
                density(&a.density)?;
                bandwidth("b", a.b)?;
                positive("beta", a.beta)?;
                exponent("p", a.p)?;
                n_grid(&a.n_grid, 4)?;
                reps(a.reps)?;
            }
            Command::LowerBounds(a) => {
                bandwidths("b-grid", &a.b_grid, 1)?;
                n_grid(&a.n_grid, 1)?;
                exponent("p", a.p)?;
                reps(a.reps)?;
                positive("s", a.s)?;
                positive("c0", a.c0)?;
                if a.x_points < 2 {
                    return fail("x-points must be >= 2");
                }
                if matches!(a.check, LowerCheck::Variance | LowerCheck::VarFloor) && a.b_grid.iter().any(|&b| b >= 0.5) {
                    return fail("variance checks need every b < 1/2");
                }
            }
            Command::RegimeMap(a) => {
                for &p in &a.p_grid {
                    for &beta in &a.beta_grid {
                        check_cell(p, beta).map_err(|e| Invalid(e.to_string()))?;
                    }
                }
                if a.fitted {
                    n_grid(&a.n_grid, 4)?;
                    reps(a.reps)?;
                }
            }
            Command::RegularityScan(a) => {
                positive("theta", a.theta)?;
                a.alpha.iter().try_for_each(|&v| positive("alpha", v))?;
                a.beta.iter().try_for_each(|&v| positive("beta", v))?;
            }
            Command::BoundsCheck(a) => {
                points("x-grid", &a.x_grid)?;
                bandwidths("b-grid", &a.b_grid, 1)?;
            }
        }
        Ok(())
    }
}
