use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nonlocal-ineq"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn nonlocal-ineq")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report on stdout")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nonlocal-ineq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn gap_on_defaults() {
    let out = run(&["gap"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["schema"], 1);
    assert_eq!(report["pass"], true);
    let gap = report["gap"].as_f64().unwrap();
    assert!(gap >= 0.9 * std::f64::consts::SQRT_2, "gap {gap}");
    assert_eq!(report["grid"]["n"], 2000);
}

#[test]
fn beckner_exponent_out_of_range() {
    let out = run(&["verify", "--ineq", "beckner", "--p", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("p out of (1,2]"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn sharpness_ratios_decrease() {
    let csv = scratch("sharpness.csv");
    let out = run(&[
        "sharpness",
        "--measure",
        "polynomial_tail:eps=0.3",
        "--kernel",
        "stable:alpha=0.5",
        "--n",
        "800",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,ratio"));
    let ratios: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(ratios.len(), 5);
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    // R = 50 is too small for s = 32, so it is raised and the report says so
    let report = json(&out);
    assert_eq!(report["grid"]["R"], 128.0);
    let warnings = report["grid"]["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("R raised")));
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["verify", "--ineq", "entropy", "--n", "400", "--suite-size", "40", "--seed", "7"];
    let csv_a = scratch("ratios_a.csv");
    let csv_b = scratch("ratios_b.csv");
    let a = bin().args(args).args(["--csv", csv_a.to_str().unwrap()]).output().unwrap();
    let b = bin()
        .args(args)
        .args(["--csv", csv_b.to_str().unwrap()])
        .env("NONLOCAL_INEQ_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(csv_a).unwrap(), std::fs::read(csv_b).unwrap());
}

#[test]
fn config_file_and_overrides() {
    let cfg = scratch("run.cfg");
    std::fs::write(
        &cfg,
        "# example\n[measure]\nfamily = polynomial_tail\neps = 1\n[kernel]\nfamily = stable\nalpha = 0.5\n[grid]\nR = 50\nn = 2000\n",
    )
    .unwrap();
    let out = run(&["check-conditions", "--config", cfg.to_str().unwrap(), "--n", "200"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["grid"]["n"], 200);
    assert_eq!(report["condition"]["analytic"]["value"], std::f64::consts::SQRT_2);

    std::fs::write(&cfg, "[measure]\nfamily = polynomial_tail\n[kernel]\nfamily = stable\nalpha = 2.5\n").unwrap();
    let out = run(&["gap", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5") && err.contains("alpha out of (0,2)"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["gap", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["gap", "--set", "grid.colour=red"]).status.code(), Some(2));
    let out = bin().args(["gap", "--n", "64"]).env("NONLOCAL_INEQ_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evolve_emits_trajectory() {
    let csv = scratch("evolve.csv");
    let out = run(&["evolve", "--n", "200", "--t-end", "0.5", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert!(report["max_abs_mass"].as_f64().unwrap() < 1e-12);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,l2,bound,dt\n"));
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 0.5).abs() < 1e-12);
    assert!(last[1] <= last[2] * 1.1);
}

#[test]
fn rates_table() {
    let csv = scratch("rates.csv");
    let out = run(&["rates", "--measure", "polynomial_tail:eps=0.3", "--r-min", "1e-3", "--r-max", "1e-1", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    let slope = report["wp_rate"]["slope"].as_f64().unwrap();
    assert!((slope + 2.0 / 3.0).abs() < 0.2 * 2.0 / 3.0, "slope {slope}");
    // no certified weight for eps < alpha
    assert!(report["sp_beta"]["metadata"]["unavailable"].is_string());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().any(|l| l == "r,wp_rate,sp_beta,local_sp_beta"));
}
