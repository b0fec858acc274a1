use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stakesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stakesim")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.json");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const CONFIG: &str = r#"{"epochs": 6, "seed": 5, "validators": {"count": 16},
    "price_path": {"constant": {"value": 2000}}, "users": {"count": 20}}"#;

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not json ({e}): {text}"))
}

#[test]
fn run_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = stakesim(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(out.join("events.json").exists() && out.join("summary.json").exists());
}

#[test]
fn epochs_override_and_csv_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = stakesim(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--epochs", "100", "--format", "csv"]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 101);
    assert!(!out.join("summary.json").exists());
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert!(stakesim(&["run", "--config", &cfg, "--out", d.to_str().unwrap(), "--seed", "77"]).status.success());
    }
    for f in ["metrics.csv", "events.json", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sweep_over_theta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("sweep");
    let o = stakesim(&["sweep", "--config", &cfg, "--param", "theta", "--values", "500,1000,2000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..3 {
        assert!(out.join(format!("run_{i:03}")).join("metrics.csv").exists());
    }
    assert_eq!(fs::read_to_string(out.join("aggregate.csv")).unwrap().lines().count(), 4);
}

#[test]
fn bad_config_exit_code_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"epochs": 6, "validators": {"count": 16}, "price_path": {"constant": {"value": 2000}}, "churn_limit": -3}"#,
    );
    let o = stakesim(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["error"], "config");
    assert_eq!(e["fields"][0], "churn_limit");
}

#[test]
fn unknown_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"epochs": 6, "validators": {"count": 16}, "price_path": {"constant": {"value": 2000}}, "fee_rebate": 0.1}"#,
    );
    let o = stakesim(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_json(&o)["message"].as_str().unwrap().contains("fee_rebate"));
}

#[test]
fn missing_config_is_io_error() {
    let o = stakesim(&["run", "--config", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"], "io");
}

#[test]
fn unknown_sweep_param() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = stakesim(&["sweep", "--config", &cfg, "--param", "fee_rebate", "--values", "1", "--out", dir.path().join("s").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["fields"][0], "fee_rebate");
}

#[test]
fn usage_errors_are_json() {
    let o = stakesim(&["run"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"], "usage");
    let o = stakesim(&["run", "--config", "x.json", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
}
