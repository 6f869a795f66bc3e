use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use qhedge_cli::{config, exit_code, run};

/// Robust quantile hedging on discretized semi-static markets.
#[derive(Parser, Debug)]
#[command(name = "qhedge", version, about)]
struct Args {
    /// Run mode, overriding the config's `run.mode`: certify, superhedge,
    /// curve-alpha, curve-x, strategy, oracle-check, convergence-sweep.
    mode: Option<String>,

    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Output file, overriding `run.out`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Level override: one level, or a comma list for convergence-sweep.
    #[arg(long)]
    n: Option<String>,

    /// Alpha grid override: comma list or `start:stop:count`.
    #[arg(long = "alpha-grid")]
    alpha_grid: Option<String>,

    /// Inversion tolerance override.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err);
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}

fn execute(args: &Args) -> Result<ExitCode, qhedge_core::EngineError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        qhedge_core::EngineError::Config(format!(
            "cannot read config {}: {}",
            args.config.display(),
            e
        ))
    })?;
    let mut cfg = config::RunConfig::from_toml(&text)?;

    if let Some(mode) = &args.mode {
        cfg.mode = config::Mode::parse(mode)?;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(tol) = args.tol {
        cfg.tol = tol;
    }
    if let Some(spec) = &args.alpha_grid {
        cfg.alpha_grid = config::parse_alpha_grid(spec)?;
    }
    if let Some(spec) = &args.n {
        let levels = config::parse_levels(spec)?;
        if cfg.mode == config::Mode::ConvergenceSweep {
            cfg.n_sweep = levels;
        } else if levels.len() == 1 {
            cfg.market.level = levels[0];
        } else {
            return Err(qhedge_core::EngineError::Config(
                "--n accepts a list only in convergence-sweep mode".into(),
            ));
        }
    }
    cfg.validate()?;

    let output = run::run(&cfg)?;
    print!("{}", output.stdout);
    for f in &output.files {
        eprintln!("wrote {}", f.display());
    }
    if !output.certified {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}
