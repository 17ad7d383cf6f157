//! One function per subcommand; each returns the table to write.

use gkde::densities::TestDensity;
use gkde::estimator::{default_grid, PreparedSample};
use gkde::experiments::bias::{
    bump_bias_experiment, endpoint_control, endpoint_leakage, linear_bias_experiment, self_similar_bump_grid,
};
use gkde::experiments::lower_bounds::{
    chernoff_check, fluctuation_floor, k_local_limit, k_local_lower, nonminimax_var_floor, stagnant_variance_bound,
    variance_predicate,
};
use gkde::experiments::rates::{oracle_bandwidth_slopes, rate_experiment, stagnant_bandwidth_check, BandwidthGrid};
use gkde::experiments::regime::{attach_fitted_slopes, regime_map};
use gkde::experiments::regularity::regularity_grid;
use gkde::experiments::RateFit;
use gkde::kernel::{kernel_bounds, l2_integral_stirling, sup_on_unit_interval, KernelPoint};
use gkde::risk::mc_risk_multi;
use gkde::{rng, Error, Result};

use crate::config::*;
use crate::output::{Cell, Table};

/// Stream key for `sample`, distinct from the replication streams `[n, r]`.
const SAMPLE_STREAM: u64 = 0x5341_4d50;

pub fn run(cmd: &Command, seed: u64) -> Result<Table> {
    match cmd {
        Command::Estimate(a) => estimate(a),
        Command::DensityEval(a) => density_eval(a),
        Command::Sample(a) => sample(a, seed),
        Command::Risk(a) => risk(a, seed),
        Command::Rate(a) => rate(a, seed),
        Command::OracleRate(a) => oracle_rate(a, seed),
        Command::Endpoint(a) => endpoint(a),
        Command::BiasFloor(a) => bias_floor(a),
        Command::Stagnant(a) => stagnant(a, seed),
        Command::LowerBounds(a) => lower_bounds(a, seed),
        Command::RegimeMap(a) => regime(a, seed),
        Command::RegularityScan(a) => regularity(a),
        Command::BoundsCheck(a) => bounds_check(a),
    }
}

fn fit_cells(f: &RateFit) -> Vec<Cell> {
    vec![f.slope.into(), f.intercept.into(), f.r_squared.into(), f.theoretical.into()]
}

const FIT_COLUMNS: [&str; 4] = ["slope", "intercept", "r_squared", "theoretical"];

fn with_fit(cols: &[&'static str]) -> Vec<&'static str> {
    cols.iter().chain(FIT_COLUMNS.iter()).copied().collect()
}

pub fn read_sample(path: &std::path::Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|_| Error::InvalidSpec(format!("line {} of {}: {l:?} is not a number", i + 1, path.display())))
        })
        .collect()
}

fn estimate(a: &EstimateArgs) -> Result<Table> {
    let data = read_sample(&a.input)?;
    let prepared = PreparedSample::new(&data)?;
    let grid = a.grid.clone().unwrap_or_else(|| default_grid(a.b));
    let fhat = prepared.eval_grid(&grid, a.b);
    let mut t = Table::new(&["x", "fhat"]);
    for (x, f) in grid.iter().zip(fhat) {
        t.push(vec![(*x).into(), f.into()]);
    }
    Ok(t)
}

fn density_eval(a: &DensityEvalArgs) -> Result<Table> {
    let d = a.density.build()?;
    let grid = a
        .grid
        .clone()
        .unwrap_or_else(|| (0..a.points).map(|i| i as f64 / (a.points - 1) as f64).collect());
    let mut t = Table::new(&["x", "pdf"]);
    for x in grid {
        t.push(vec![x.into(), d.pdf(x).into()]);
    }
    Ok(t)
}

fn sample(a: &SampleArgs, seed: u64) -> Result<Table> {
    let d = a.density.build()?;
    let mut r = rng::stream(seed, &[SAMPLE_STREAM, a.n as u64]);
    let xs = d.sample(a.n, &mut r)?;
    let mut t = Table::new(&["x"]);
    for x in xs {
        t.push(vec![x.into()]);
    }
    Ok(t)
}

const RISK_COLUMNS: [&str; 10] = [
    "n", "b", "p", "risk_norm", "risk_p", "stderr", "bias_term", "stoch_term", "tail_bound", "replications",
];

fn risk_cells(r: &gkde::risk::RiskReport) -> Vec<Cell> {
    vec![
        r.n.into(),
        r.b.into(),
        r.p.into(),
        r.risk_norm().into(),
        r.risk_p.into(),
        r.stderr.into(),
        r.bias_term.into(),
        r.stoch_term.into(),
        r.tail_bound.into(),
        r.replications.into(),
    ]
}

fn risk(a: &RiskArgs, seed: u64) -> Result<Table> {
    let d = a.density.build()?;
    let table = mc_risk_multi(&d, a.n, &a.b, &a.p, a.reps, seed)?;
    let mut t = Table::new(&RISK_COLUMNS);
    for row in &table {
        for r in row {
            t.push(risk_cells(r));
        }
    }
    Ok(t)
}

fn rate(a: &RateArgs, seed: u64) -> Result<Table> {
    let d = a.density.build()?;
    let study = rate_experiment(&d, a.beta, a.p, a.c, &a.n_grid, a.reps, seed)?;
    let mut t = Table::new(&with_fit(&RISK_COLUMNS));
    for r in &study.reports {
        let mut row = risk_cells(r);
        row.extend(fit_cells(&study.fit));
        t.push(row);
    }
    Ok(t)
}

fn oracle_rate(a: &OracleRateArgs, seed: u64) -> Result<Table> {
    let d = a.density.build()?;
    let grid = BandwidthGrid::Centered {
        c: a.center_c,
        beta: a.beta,
        per_decade: a.per_decade,
        decades: a.decades,
    };
    let studies = oracle_bandwidth_slopes(&d, a.beta, &a.p, &a.n_grid, &grid, a.reps, seed)?;
    let mut cols = with_fit(&RISK_COLUMNS);
    cols.push("grid_edge");
    let mut t = Table::new(&cols);
    for s in &studies {
        let edge = s.hits_grid_edge();
        for r in &s.best {
            let mut row = risk_cells(r);
            row.extend(fit_cells(&s.fit));
            row.push(edge.into());
            t.push(row);
        }
    }
    Ok(t)
}

fn endpoint(a: &EndpointArgs) -> Result<Table> {
    let study = endpoint_leakage(a.p, &a.b_grid)?;
    let mut t = Table::new(&with_fit(&["b", "p", "bias_term", "control_bias_term"]));
    for (b, v) in study.b_grid.iter().zip(&study.bias) {
        let mut row = vec![(*b).into(), a.p.into(), (*v).into(), endpoint_control(a.p, *b)?.into()];
        row.extend(fit_cells(&study.fit));
        t.push(row);
    }
    Ok(t)
}

fn bias_floor(a: &BiasFloorArgs) -> Result<Table> {
    let region = parse_region(&a.region).map_err(|e| Error::InvalidSpec(e.0))?;
    let study = match a.family {
        BiasFamily::Linear => {
            let g = a.b_grid.clone().unwrap_or_else(|| vec![0.02, 0.01, 0.005, 0.002]);
            linear_bias_experiment(a.l, &g, region)?
        }
        BiasFamily::Bump => {
            let g = a.b_grid.clone().unwrap_or_else(|| self_similar_bump_grid(1, 8));
            bump_bias_experiment(a.beta, a.l, &g, region)?
        }
    };
    let mut t = Table::new(&with_fit(&["b", "l1_bias", "scaled", "fitted_constant"]));
    for (b, v) in study.b_grid.iter().zip(&study.bias) {
        let mut row = vec![
            (*b).into(),
            (*v).into(),
            (v / b.powf(study.fit.theoretical)).into(),
            study.fitted_constant.into(),
        ];
        row.extend(fit_cells(&study.fit));
        t.push(row);
    }
    Ok(t)
}

fn stagnant(a: &StagnantArgs, seed: u64) -> Result<Table> {
    let d = a.density.build()?;
    let s = stagnant_bandwidth_check(&d, a.b, a.beta, a.p, &a.n_grid, a.reps, seed)?;
    let mut cols = RISK_COLUMNS.to_vec();
    cols.extend(["ratio_to_minimax", "plateau_gap", "ratio_increasing"]);
    cols.extend(FIT_COLUMNS);
    let mut t = Table::new(&cols);
    for (r, q) in s.reports.iter().zip(&s.ratio_to_minimax) {
        let mut row = risk_cells(r);
        row.extend([(*q).into(), s.plateau_gap.into(), s.ratio_increasing.into()]);
        row.extend(fit_cells(&s.fit));
        t.push(row);
    }
    Ok(t)
}

const LOWER_COLUMNS: [&str; 8] = ["check", "n", "b", "x", "p", "value", "reference", "holds"];

fn lower_bounds(a: &LowerBoundsArgs, seed: u64) -> Result<Table> {
    let mut t = Table::new(&LOWER_COLUMNS);
    let e = || Cell::Empty;
    match a.check {
        LowerCheck::Chernoff => {
            let xs: Vec<f64> = (0..a.x_points).map(|i| 0.5 * i as f64 / (a.x_points - 1) as f64).collect();
            for r in chernoff_check(&a.b_grid, &xs)? {
                t.push(vec!["chernoff".into(), e(), r.b.into(), r.x.into(), e(), r.tail.into(), r.bound.into(), (r.tail <= r.bound).into()]);
            }
        }
        LowerCheck::KLocal => {
            let (delta, a0, a1) = (2.5, 0.25, 5.0 / 6.0);
            let limit = k_local_limit(delta, a0, a1);
            for (b, v) in k_local_lower(&a.b_grid, delta, a0, a1, a.x_points)? {
                t.push(vec!["k-local".into(), e(), b.into(), e(), e(), v.into(), limit.into(), (v > 0.0).into()]);
            }
        }
        LowerCheck::Variance => {
            let d = TestDensity::molli_uniform();
            for &n in &a.n_grid {
                for &b in &a.b_grid {
                    let chk = variance_predicate(&d, b, n, a.x_points)?;
                    for (x, _, scaled) in chk.points {
                        t.push(vec!["variance".into(), n.into(), b.into(), x.into(), e(), scaled.into(), chk.fitted_c.into(), (scaled > 0.0).into()]);
                    }
                }
            }
        }
        LowerCheck::VarFloor => {
            let d = TestDensity::molli_uniform();
            for &n in &a.n_grid {
                for &b in &a.b_grid {
                    let v = nonminimax_var_floor(&d, b, n, a.p)?;
                    let reference = v.i_integral / (n as f64 * b.sqrt()).powf(a.p / 2.0);
                    t.push(vec!["var-floor".into(), n.into(), b.into(), e(), a.p.into(), v.floor.into(), reference.into(), (v.ratio > 0.0).into()]);
                }
            }
        }
        LowerCheck::Fluctuation => {
            let d = TestDensity::molli_uniform();
            let f = fluctuation_floor(&d, &a.n_grid, &a.b_grid, a.min_s, a.reps, seed)?;
            for pt in &f.points {
                let scaled_se = pt.fluctuation.stderr * (pt.n as f64).sqrt() * pt.b.powf(0.25);
                t.push(vec!["fluctuation".into(), pt.n.into(), pt.b.into(), e(), 1.0.into(), pt.scaled.into(), scaled_se.into(), (pt.scaled > 0.0).into()]);
            }
        }
        LowerCheck::RareEvent => {
            for &n in &a.n_grid {
                let r = stagnant_variance_bound(n, a.s, a.c0, a.x_points)?;
                let holds = r.holds();
                t.push(vec!["rare-event-prob".into(), n.into(), r.b.into(), e(), e(), r.event_prob.into(), r.event_prob_bound.into(), holds.into()]);
                t.push(vec!["rare-event-kernel".into(), n.into(), r.b.into(), e(), e(), r.kernel_max.into(), r.kernel_bound.into(), holds.into()]);
                t.push(vec!["rare-event-exponent".into(), n.into(), r.b.into(), e(), e(), r.exponent.into(), r.c_fit.into(), holds.into()]);
            }
        }
    }
    Ok(t)
}

fn regime(a: &RegimeMapArgs, seed: u64) -> Result<Table> {
    let mut cells = regime_map(&a.p_grid, &a.beta_grid)?;
    if a.fitted {
        attach_fitted_slopes(&mut cells, &a.n_grid, a.reps, seed)?;
    }
    let mut t = Table::new(&["p", "beta", "predicted", "fitted_slope", "oracle_b"]);
    for c in cells {
        t.push(vec![c.p.into(), c.beta.into(), c.predicted.label().into(), c.fitted_slope.into(), c.oracle_b.into()]);
    }
    Ok(t)
}

fn regularity(a: &RegularityArgs) -> Result<Table> {
    let cells = regularity_grid(&a.alpha, &a.beta, a.theta)?;
    let mut t = Table::new(&["alpha", "beta", "predicted_member", "growth", "max_quotient", "empirically_bounded", "agrees"]);
    for c in &cells {
        t.push(vec![
            c.alpha.into(),
            c.beta.into(),
            c.predicted_member.into(),
            c.growth.into(),
            c.max_quotient().into(),
            c.empirically_bounded.into(),
            c.agrees().into(),
        ]);
    }
    Ok(t)
}

fn bounds_check(a: &BoundsCheckArgs) -> Result<Table> {
    let mut t = Table::new(&[
        "x", "b", "mode_value", "sup_bound", "sup_unit_interval", "l2_value", "l2_stirling", "tail_bound", "holds",
    ]);
    for &b in &a.b_grid {
        for &x in &a.x_grid {
            let kp = KernelPoint::new(x, b)?;
            let kb = kernel_bounds(kp);
            let mode = kp.pdf(x);
            let unit = sup_on_unit_interval(kp);
            let stirling = if x > 0.0 { Some(l2_integral_stirling(kp)?) } else { None };
            let mut holds = mode <= kb.sup_bound * (1.0 + 1e-12);
            if x >= 3.0 {
                holds &= unit <= kb.tail_bound;
            }
            if let Some(s) = stirling {
                holds &= (s / kb.l2_value - 1.0).abs() <= 1e-10;
            }
            t.push(vec![
                x.into(),
                b.into(),
                mode.into(),
                kb.sup_bound.into(),
                unit.into(),
                kb.l2_value.into(),
                stirling.into(),
                if x > 0.0 { kb.tail_bound.into() } else { Cell::Empty },
                holds.into(),
            ]);
        }
    }
    Ok(t)
}
