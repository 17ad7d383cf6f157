use std::path::Path;
use std::process::{Command, Output};

use gkde::densities::TestDensity;
use gkde::estimator::PreparedSample;

const MG: &str = r#"{"kind":"MirroredGamma","params":{"alpha":4,"theta":0.2}}"#;

fn gkde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gkde"))
        .args(args)
        .env_remove("GKDE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn estimate_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.txt");
    std::fs::write(&input, "0.12\n0.5\n\n0.93\n0.0\n").unwrap();
    let out = stdout(&gkde(&["estimate", "--b", "0.02", "--input", input.to_str().unwrap(), "--grid", "0,0.25,0.5,1.5"]));
    let r = rows(&out);
    assert_eq!(r[0], ["x", "fhat"]);
    let lib = PreparedSample::new(&[0.12, 0.5, 0.93, 0.0]).unwrap();
    for row in &r[1..] {
        let x: f64 = row[0].parse().unwrap();
        let f: f64 = row[1].parse().unwrap();
        assert_eq!(f, lib.eval(x, 0.02), "x = {x}");
    }
    assert_eq!(r.len(), 5);
}

#[test]
fn estimate_default_grid_covers_window() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.txt");
    std::fs::write(&input, "0.3\n").unwrap();
    let out = stdout(&gkde(&["estimate", "--b", "0.05", "--input", input.to_str().unwrap()]));
    let xs: Vec<f64> = rows(&out)[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(xs.len() > 100);
    assert!(xs[0] > 0.0 && *xs.last().unwrap() < 3.0);
    assert!(xs.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn density_eval_matches_library() {
    let out = stdout(&gkde(&["density-eval", "--density", MG, "--points", "11"]));
    let d = TestDensity::mirrored_gamma(4.0, 0.2).unwrap();
    let r = rows(&out);
    assert_eq!(r.len(), 12);
    for row in &r[1..] {
        let x: f64 = row[0].parse().unwrap();
        assert_eq!(row[1].parse::<f64>().unwrap(), d.pdf(x));
    }
}

#[test]
fn seed_flag_beats_environment() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_gkde"));
        c.args(["sample", "--density", r#"{"kind":"MolliUniform"}"#, "--n", "5"]);
        c.env_remove("GKDE_SEED");
        if let Some(e) = env {
            c.env("GKDE_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        stdout(&c.output().unwrap())
    };
    let s3 = run(None, Some("3"));
    assert_eq!(run(Some("3"), None), s3);
    assert_eq!(run(Some("4"), Some("3")), s3);
    assert_ne!(run(Some("4"), None), s3);
}

#[test]
fn validation_errors_exit_2_before_work() {
    for args in [
        vec!["risk", "--density", r#"{"kind":"MolliUniform"}"#, "--n", "10", "--b", "0"],
        vec!["risk", "--density", r#"{"kind":"MolliUniform"}"#, "--n", "10", "--b", "0.1", "--p", "0.5"],
        vec!["rate", "--density", MG, "--beta", "2", "--p", "2", "--n-grid", "64,32,128,256"],
        vec!["rate", "--density", r#"{"kind":"MirroredGamma","params":{"alpha":4}}"#, "--beta", "2", "--p", "2"],
        vec!["regime-map", "--p-grid", "9"],
        vec!["bias-floor", "--family", "bump", "--b-grid", "0.1,0.05,0.02,0.01"],
        vec!["bias-floor", "--family", "linear", "--region", "cores"],
        vec!["estimate", "--b", "0.1", "--input", "/nonexistent/file"],
        vec!["no-such-command"],
        vec!["risk", "--n", "10"],
    ] {
        let o = gkde(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn bad_sample_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.txt");
    std::fs::write(&input, "0.1\nabc\n").unwrap();
    let o = gkde(&["estimate", "--b", "0.1", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&input, "0.1\n-0.2\n").unwrap();
    let o = gkde(&["estimate", "--b", "0.1", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn run_to(dir: &Path, name: &str, threads: &str, args: &[&str]) -> (Vec<u8>, serde_json::Value) {
    let out = dir.join(name);
    let mut full = vec!["--threads", threads, "--seed", "11", "-o", out.to_str().unwrap()];
    full.extend_from_slice(args);
    let o = gkde(&full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta = std::fs::read_to_string(format!("{}.meta.json", out.display())).unwrap();
    (std::fs::read(&out).unwrap(), serde_json::from_str(&meta).unwrap())
}

#[test]
fn sidecar_replays_to_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["risk", "--density", MG, "--n", "64", "--b", "0.1,0.05", "--p", "1,2", "--reps", "4"];
    let (csv, meta) = run_to(dir.path(), "a.csv", "2", &args);
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert!(meta["wall_time_s"].as_f64().unwrap() >= 0.0);
    let cmd = &meta["config"]["command"];
    assert_eq!(cmd["name"], "risk");
    // rebuild the command line from the sidecar and replay it
    let bs: Vec<String> = cmd["b"].as_array().unwrap().iter().map(|v| v.to_string()).collect();
    let ps: Vec<String> = cmd["p"].as_array().unwrap().iter().map(|v| v.to_string()).collect();
    let density = cmd["density"].to_string();
    let n = cmd["n"].to_string();
    let reps = cmd["reps"].to_string();
    let seed = meta["config"]["seed"].to_string();
    let out = stdout(&gkde(&[
        "--seed", &seed, "risk", "--density", &density, "--n", &n, "--b", &bs.join(","), "--p", &ps.join(","), "--reps", &reps,
    ]));
    assert_eq!(out.as_bytes(), csv.as_slice());
    let header = String::from_utf8(csv).unwrap();
    assert!(header.starts_with("n,b,p,risk_norm,"));
}

#[test]
fn output_is_invariant_under_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["rate", "--density", MG, "--beta", "2", "--p", "2", "--n-grid", "64,128,256,512", "--reps", "6"];
    let (a, _) = run_to(dir.path(), "t1.csv", "1", &args);
    let (b, _) = run_to(dir.path(), "t3.csv", "3", &args);
    assert_eq!(a, b);
}

#[test]
fn regime_map_example_cell() {
    let out = stdout(&gkde(&["regime-map", "--analytic", "--p-grid", "2,3.5,5", "--beta-grid", "0.3,1.5,2"]));
    let r = rows(&out);
    assert_eq!(r[0], ["p", "beta", "predicted", "fitted_slope", "oracle_b"]);
    let find = |p: f64, b: f64| {
        r[1..]
            .iter()
            .find(|row| row[0].parse::<f64>().unwrap() == p && row[1].parse::<f64>().unwrap() == b)
            .unwrap()[2]
            .clone()
    };
    assert_eq!(find(2.0, 1.5), "Minimax");
    assert_eq!(find(3.5, 0.3), "NonMinimaxP");
    assert_eq!(find(5.0, 2.0), "NonMinimaxP");
}

#[test]
fn every_subcommand_writes_a_header() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["endpoint", "--b-grid", "0.05,0.04,0.03,0.02"],
        vec!["bias-floor", "--family", "linear", "--region", "interval:0:0.5"],
        vec!["bias-floor", "--family", "bump", "--beta", "1", "--b-grid", "0.0017361111128472223,0.00043402777821180557,0.00019290123476080247,0.00010850694455295139", "--region", "cores:0.5"],
        vec!["stagnant", "--density", r#"{"kind":"MolliLinear"}"#, "--n-grid", "64,128,256,512", "--reps", "3"],
        vec!["lower-bounds", "--check", "chernoff", "--x-points", "3"],
        vec!["lower-bounds", "--check", "k-local", "--b-grid", "0.01,0.001"],
        vec!["lower-bounds", "--check", "variance", "--b-grid", "0.02", "--n-grid", "100", "--x-points", "3"],
        vec!["lower-bounds", "--check", "var-floor", "--b-grid", "0.05", "--n-grid", "100"],
        vec!["lower-bounds", "--check", "fluctuation", "--b-grid", "0.05", "--n-grid", "200", "--reps", "3"],
        vec!["lower-bounds", "--check", "rare-event", "--n-grid", "10000,100000", "--x-points", "5"],
        vec!["oracle-rate", "--density", MG, "--beta", "2", "--p", "2", "--n-grid", "32,64,128,256", "--reps", "2", "--decades", "0.75"],
        vec!["bounds-check"],
    ];
    for args in cases {
        let out = stdout(&gkde(&args));
        let r = rows(&out);
        assert!(r.len() >= 2, "{args:?}");
        assert!(r[0].iter().all(|h| !h.is_empty() && h.parse::<f64>().is_err()), "{args:?}");
        assert!(r[1..].iter().all(|row| row.len() == r[0].len()), "{args:?}");
    }
}

#[test]
fn bounds_check_holds_everywhere() {
    let out = stdout(&gkde(&["bounds-check"]));
    let r = rows(&out);
    let holds = r[0].iter().position(|h| h == "holds").unwrap();
    assert!(r[1..].iter().all(|row| row[holds] == "true"));
}
