//! End-to-end runs of the batch front end through the library surface plus
//! one spawn of the real binary for the exit-code contract.

use std::fs;
use std::process::Command;

use qhedge_cli::{config::RunConfig, run};

fn base_config(mode_block: &str) -> String {
    format!(
        r#"
[market]
horizon = 1
level = 3
lambda = 0.01
bounds = [[0.5, 1.5]]

[claim]
kind = "power"
exponent = 2.0

[models]
form = "full-simplex"

[run]
{mode_block}
"#
    )
}

#[test]
fn certify_reports_and_passes() {
    let cfg = RunConfig::from_toml(&base_config("mode = \"certify\"")).unwrap();
    let out = run::run(&cfg).unwrap();
    assert!(out.certified);
    assert!(out.stdout.contains("certified true"));
    assert!(out.stdout.contains("supported_paths 9"));
}

#[test]
fn curve_alpha_is_deterministic_and_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("curve.csv");
    let text = base_config(&format!(
        "mode = \"curve-alpha\"\nalpha_grid = [0.2, 0.5, 0.8, 1.0]\nout = \"{}\"",
        out_path.display()
    ));
    let cfg = RunConfig::from_toml(&text).unwrap();
    run::run(&cfg).unwrap();
    let first = fs::read(&out_path).unwrap();
    run::run(&cfg).unwrap();
    let second = fs::read(&out_path).unwrap();
    assert_eq!(first, second, "identical config must give identical bytes");

    let body = String::from_utf8(first).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next().unwrap(), "alpha,price,achieved_ratio");
    let mut prev_price = -1.0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cols[1] >= -1e-12 && cols[1] <= 1.25 + 1e-9);
        assert!(cols[1] >= prev_price - 1e-7, "prices must be nondecreasing");
        prev_price = cols[1];
    }
}

#[test]
fn curve_x_reports_value_and_slope() {
    let text = base_config("mode = \"curve-x\"\nx_grid = [0.0, 0.625, 1.25]");
    let cfg = RunConfig::from_toml(&text).unwrap();
    let out = run::run(&cfg).unwrap();
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(lines[0], "x,value,a_star");
    assert_eq!(lines.len(), 4);
    let mid: Vec<f64> = lines[2].split(',').map(|c| c.parse().unwrap()).collect();
    assert!((mid[1] - 0.5).abs() < 1e-8);
}

#[test]
fn strategy_dump_has_positions() {
    let text = base_config("mode = \"strategy\"\nalpha = 0.5");
    let cfg = RunConfig::from_toml(&text).unwrap();
    let out = run::run(&cfg).unwrap();
    assert!(out.stdout.contains("# alpha"));
    assert!(out.stdout.contains("x "));
    assert!(out.stdout.lines().any(|l| l.starts_with("H 0 - ")));
}

#[test]
fn oracle_check_reports_small_gap() {
    let text = base_config("mode = \"oracle-check\"\nalpha_grid = [0.3, 0.7]");
    let cfg = RunConfig::from_toml(&text).unwrap();
    let out = run::run(&cfg).unwrap();
    let gap_line = out
        .stdout
        .lines()
        .find(|l| l.starts_with("max_abs_gap"))
        .unwrap();
    let gap: f64 = gap_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(gap < 1e-5, "oracle gap {}", gap);
}

#[test]
fn sweep_covers_all_levels() {
    let text = base_config(
        "mode = \"convergence-sweep\"\nalpha_grid = [0.5, 1.0]\nn_sweep = [2, 3]",
    );
    let cfg = RunConfig::from_toml(&text).unwrap();
    let out = run::run(&cfg).unwrap();
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(lines[0], "n,alpha,price");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1].starts_with("2,"));
    assert!(lines[3].starts_with("3,"));
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_qhedge");
    let dir = tempfile::tempdir().unwrap();

    // malformed config -> 2
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "not toml at all [[").unwrap();
    let status = Command::new(exe)
        .args(["certify", "--config"])
        .arg(&bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // an option priced above its maximal payoff -> market admits arbitrage -> 3
    let uncert = dir.path().join("uncertified.toml");
    fs::write(
        &uncert,
        r#"
[market]
horizon = 1
level = 2
lambda = 0.01
bounds = [[0.5, 1.5]]

[claim]
kind = "power"
exponent = 2.0

[[options]]
kind = "put"
strike = 1.0
price = 0.6

[models]
form = "full-simplex"

[run]
mode = "curve-alpha"
alpha_grid = [0.5]
"#,
    )
    .unwrap();
    let status = Command::new(exe)
        .arg("--config")
        .arg(&uncert)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));

    // healthy run -> 0, file written
    let good = dir.path().join("good.toml");
    let out_csv = dir.path().join("c.csv");
    fs::write(
        &good,
        format!(
            r#"
[market]
horizon = 1
level = 2
lambda = 0.01
bounds = [[0.5, 1.5]]

[claim]
kind = "power"
exponent = 2.0

[models]
form = "full-simplex"

[run]
mode = "curve-alpha"
alpha_grid = [0.5, 1.0]
out = "{}"
"#,
            out_csv.display()
        ),
    )
    .unwrap();
    let status = Command::new(exe)
        .arg("--config")
        .arg(&good)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out_csv.exists());
}

#[test]
fn shipped_configs_parse() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            let text = fs::read_to_string(&path).unwrap();
            RunConfig::from_toml(&text)
                .unwrap_or_else(|e| panic!("{} failed to parse: {}", path.display(), e));
        }
    }
}
