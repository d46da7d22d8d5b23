use std::path::Path;
use std::process::{Command, Output};

use fairfee::analysis::{FminPoint, LatencyBucket, StrategyRevenueRow};
use fairfee::config::load_config;
use fairfee::output::{config_from_summary, read_header, read_table, SwapRow};

const SMALL: [&str; 8] = [
    "--steps",
    "400",
    "--runs",
    "2",
    "--set",
    "protocol.bs_max=50",
    "--set",
    "protocol.epoch_len=100",
];

fn fairfee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairfee"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, cmd: &str, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec![cmd, "--out", out];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    fairfee(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_bitcoinf_writes_flat_price_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "simulate", &["--plots"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let fmin: Vec<FminPoint> = read_table(&dir.path().join("fmin.csv")).unwrap();
    assert_eq!(fmin.len(), 4);
    assert!(fmin.iter().all(|p| p.fmin == 0.005 && p.std == 0.0));
    assert_eq!(read_header(&dir.path().join("fmin.csv")).unwrap(), ["epoch", "fmin", "std"]);
    assert_eq!(
        read_header(&dir.path().join("latency_eta.csv")).unwrap(),
        ["eta_lo", "eta_hi", "mean_latency", "count", "stranded"]
    );
    let buckets: Vec<LatencyBucket> = read_table(&dir.path().join("latency_eta.csv")).unwrap();
    assert!(buckets.iter().all(|b| b.stranded == 0));
    let swap: Vec<SwapRow> = read_table(&dir.path().join("swap_bound.csv")).unwrap();
    assert_eq!(swap.len(), 2);
    for f in ["fmin.svg", "latency_eta.svg", "swap_bound.svg", "summary.txt"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn summary_config_reloads_to_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "fmin-trajectory", &["--protocol", "bitcoin", "--beta", "0.5", "--seed", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(text.contains("seed: 9"));
    let overrides: Vec<(String, String)> = [
        ("protocol.bs_max", "50"),
        ("protocol.epoch_len", "100"),
        ("protocol.variant", "bitcoin"),
        ("seed", "9"),
        ("n_runs", "2"),
        ("total_steps", "400"),
        ("beta", "0.5"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    assert_eq!(config_from_summary(&text).unwrap(), load_config(None, &overrides).unwrap());
}

#[test]
fn repeated_commands_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run_in(d.path(), "simulate", &["--seed", "42", "--plots"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["fmin.csv", "latency_eta.csv", "swap_bound.csv", "latency_eta.svg", "summary.txt"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn bitcoin_beta_sweep_favours_greedy() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "sweep-beta", &["--protocol", "bitcoin", "--grid", "0,0.25,0.5,0.75,1", "--plots"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<StrategyRevenueRow> = read_table(&dir.path().join("beta_sweep.csv")).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0].greedy_avg, None);
    assert_eq!(rows[4].fifo_avg, None);
    for r in &rows[1..4] {
        assert!(r.greedy_avg.unwrap() > r.fifo_avg.unwrap(), "beta {}", r.beta);
    }
    let svg = std::fs::read_to_string(dir.path().join("beta_sweep.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("epsilon_dse: 0\n"), "{summary}");
}

#[test]
fn sweep_alpha_and_latency_curve_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "sweep-alpha", &["--grid", "0.2,0.4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        read_header(&dir.path().join("alpha_trend.csv")).unwrap(),
        ["alpha", "breakpoint", "sub_breakpoint_latency", "breakpoint_flagged"]
    );
    let o = run_in(dir.path(), "latency-curve", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run_in(dir.path(), "sweep-alpha", &["--protocol", "bitcoin"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn swap_bound_on_bitcoin_warns_instead_of_failing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "swap-bound", &["--protocol", "bitcoin"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("bitcoinf variant"));
    assert!(read_table::<SwapRow>(&dir.path().join("swap_bound.csv")).unwrap().is_empty());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "simulate", &["--set", "protocol.alpha=0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("protocol.alpha"));

    let o = run_in(dir.path(), "simulate", &["--set", "alpha=0.3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("protocol.stranded_threshold"), "{}", stderr(&o));

    let missing = dir.path().join("nope.json");
    let o = run_in(dir.path(), "simulate", &["--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    assert_eq!(fairfee(&[]).status.code(), Some(1));
    assert_eq!(fairfee(&["bogus"]).status.code(), Some(1));
    assert_eq!(fairfee(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"protocol.variant": "bitcoin", "beta": 1.0, "protocol.stranded_threshold": 5}"#).unwrap();
    let o = run_in(dir.path(), "latency-curve", &["--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains(r#""protocol.variant":"bitcoin""#));
    assert!(summary.contains(r#""protocol.stranded_threshold":5"#));
}

#[test]
fn verify_prints_every_property() {
    let dir = tempfile::tempdir().unwrap();
    let o = fairfee(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.matches("[PASS]").count(), 8, "{stdout}");
    assert!(!stdout.contains("[FAIL]"));
}
