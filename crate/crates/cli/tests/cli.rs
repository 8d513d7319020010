use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lwa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lwa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SCENARIO: &str = r#"{
  "id": "two",
  "users": [
    {"qos": {"rate": 1e6, "delay_bound": 0.2, "violation_prob": 0.01},
     "channels": [{"band_id": 1, "gamma_bar": 10}, {"band_id": 2, "gamma_bar": 8}]},
    {"qos": {"rate": 1e6, "delay_bound": 0.2, "violation_prob": 0.01},
     "channels": [{"band_id": 1, "gamma_bar": 3}, {"band_id": 2, "gamma_bar": 12}]}
  ],
  "b1": 1e6
}"#;

fn small_spec(dir: &Path, extra: &str) -> String {
    let path = dir.join("spec.json");
    fs::write(
        &path,
        format!(
            r#"{{"name": "small", "variable": "delay_bound", "grid": [0.1, 0.5], "seeds": 2,
                "base": {{"users": 3, "b1": 3e6{extra}}}}}"#
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn ec_reports_each_theta() {
    let out = lwa(&["ec", "--band", "licensed", "--snr", "10", "--beta", "1e6", "--theta", "1e-7", "1e-5"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let lines = v.as_array().unwrap();
    assert_eq!(lines.len(), 2);
    let ec: Vec<f64> = lines.iter().map(|l| l["ec"].as_f64().unwrap()).collect();
    assert!(ec[0] > ec[1] && ec[1] > 0.0);
}

#[test]
fn solve_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.json");
    fs::write(&cfg, SCENARIO).unwrap();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = lwa(&["--quiet", "solve", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        let csv = fs::read_to_string(out_dir.join("two-optimal.csv")).unwrap();
        assert!(csv.starts_with("scenario_id,scheme,objective_hz,iterations,status,wall_time_s\ntwo,optimal,"));
        reports.push(fs::read(out_dir.join("two-optimal.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn solve_baseline_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.json");
    fs::write(&cfg, SCENARIO).unwrap();
    let out = lwa(&["solve", "--config", cfg.to_str().unwrap(), "--scheme", "sms", "--gamma-split", "0.4"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("two,sms,"));

    assert_eq!(code(&lwa(&["solve", "--config", cfg.to_str().unwrap(), "--scheme", "nope"])), 1);
    fs::write(&cfg, r#"{"users": [], "b1": 1}"#).unwrap();
    let out = lwa(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert_eq!(code(&lwa(&["solve", "--config", "/nonexistent/scenario.json"])), 1);
}

#[test]
fn simulate_writes_raw_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let args = [
        "--quiet", "simulate", "--contenders", "3", "--slots", "50000", "--seed", "4", "--raw", "--out",
        out_dir.to_str().unwrap(),
    ];
    assert_eq!(code(&lwa(&args)), 0);
    let stats: Value = serde_json::from_slice(&fs::read(out_dir.join("simulation.json")).unwrap()).unwrap();
    let n = stats["off_time"]["samples"].as_u64().unwrap();
    let raw = fs::read(out_dir.join("off_times.bin")).unwrap();
    assert_eq!(raw.len() as u64, 8 * n);
    assert_eq!(code(&lwa(&args)), 0);
    assert_eq!(fs::read(out_dir.join("off_times.bin")).unwrap(), raw);

    assert_eq!(code(&lwa(&["simulate", "--raw", "--slots", "1000"])), 1);
}

#[test]
fn sweep_writes_versioned_csv_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path(), "");
    let out_dir = dir.path().join("out");
    let out = lwa(&["--quiet", "sweep-fig3", "--config", &spec, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("small.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# schema=lwa-sweep-csv/1"));
    assert!(lines.next().unwrap().starts_with("delay_bound,scheme,"));
    assert_eq!(lines.count(), 6);
    assert!(out_dir.join("summary.json").exists());
    assert_eq!(fs::read_dir(out_dir.join("runs")).unwrap().count(), 12);
}

#[test]
fn gamma_split_only_changes_sms() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path(), "");
    let read_runs = |g: &str| {
        let out_dir = dir.path().join(format!("g{g}"));
        let out = lwa(&["--quiet", "sweep-fig3", "--config", &spec, "--gamma-split", g, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
        let mut by_name = std::collections::BTreeMap::new();
        for e in fs::read_dir(out_dir.join("runs")).unwrap() {
            let e = e.unwrap();
            by_name.insert(e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap());
        }
        by_name
    };
    let (a, b, c) = (read_runs("0.4"), read_runs("0.6"), read_runs("0.8"));
    let mut sms_changed = false;
    for (name, bytes) in &a {
        if name.contains("optimal") {
            assert_eq!(bytes, &b[name], "{name}");
            assert_eq!(bytes, &c[name], "{name}");
        }
        if name.contains("sms") {
            sms_changed |= bytes != &b[name] || bytes != &c[name];
        }
    }
    assert!(sms_changed);
}

#[test]
fn sweep_with_infeasible_points_exits_partial() {
    let dir = tempfile::tempdir().unwrap();
    // A big-M cap no licensed allocation can stay under.
    let spec = small_spec(dir.path(), r#", "big_m": 3e6, "rate": 2e7"#);
    let out_dir = dir.path().join("out");
    let out = lwa(&["--quiet", "sweep-fig3", "--config", &spec, "--scheme", "sas", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("small.csv")).unwrap();
    assert!(csv.lines().skip(2).all(|l| l.ends_with(",2")), "{csv}");
}

#[test]
fn validate_reports_and_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("validation.json");
    fs::write(&cfg, r#"{"contenders": [5], "slots": 200000, "queue_cycles": 20000}"#).unwrap();
    let out_dir = dir.path().join("v");
    let out = lwa(&["--quiet", "validate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    let report: Value = serde_json::from_slice(&fs::read(out_dir.join("validation.json")).unwrap()).unwrap();
    let passed = report["passed"].as_bool().unwrap();
    assert_eq!(code(&out), if passed { 0 } else { 2 });
    assert_eq!(report["contention"].as_array().unwrap().len(), 1);
}
