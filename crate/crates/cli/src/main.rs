mod commands;
mod config;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use config::Cli;
use output::Meta;

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let (cfg, meta_path) = Cli::parse().into_config();
    if let Err(e) = cfg.validate() {
        eprintln!("gkde: invalid configuration: {e}");
        return ExitCode::from(2);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("gkde: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    let started = Instant::now();
    let table = match pool.install(|| commands::run(&cfg.command, cfg.seed)) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("gkde: {e}");
            return ExitCode::from(exit_status(&e));
        }
    };
    let wall = started.elapsed().as_secs_f64();
    let bytes = match table.to_csv() {
        Ok(b) => b,
        Err(e) => {
            eprintln!("gkde: cannot format CSV: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = output::write_bytes(cfg.output.as_deref(), &bytes) {
        eprintln!("gkde: cannot write output: {e}");
        return ExitCode::from(1);
    }
    if let Some(path) = meta_path {
        let meta = Meta {
            seed: cfg.seed,
            wall_time_s: wall,
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads_used: pool.current_num_threads(),
            config: cfg,
        };
        if let Err(e) = output::write_meta(&path, &meta) {
            eprintln!("gkde: cannot write {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    ExitCode::SUCCESS
}

/// 3 for numerical failures, 2 for everything attributable to the input.
fn exit_status(e: &gkde::Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_status_mapping() {
        let numerical = gkde::Error::QuadratureNonConvergence {
            op: "exact_mean_estimate",
            tolerance: 1e-11,
            estimate: 1e-6,
        };
        assert_eq!(exit_status(&numerical), 3);
        assert_eq!(exit_status(&gkde::Error::InvalidSpec("x".into())), 2);
        assert_eq!(
            exit_status(&gkde::Error::BandwidthTooLarge {
                b: 0.5,
                detail: String::new()
            }),
            2
        );
    }

    #[test]
    fn sidecar_config_round_trips() {
        let cli = Cli::try_parse_from([
            "gkde",
            "--seed",
            "7",
            "-o",
            "out.csv",
            "rate",
            "--beta",
            "2",
            "--p",
            "2",
            "--density",
            r#"{"kind":"MirroredGamma","params":{"alpha":4,"theta":0.2}}"#,
        ])
        .unwrap();
        let (cfg, meta) = cli.into_config();
        assert_eq!(meta.unwrap(), std::path::PathBuf::from("out.csv.meta.json"));
        let json = serde_json::to_string(&cfg).unwrap();
        let back: config::RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        back.validate().unwrap();
    }
}
