use std::path::Path;
use std::process::{Command, Output};

fn loadcomb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loadcomb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn error_kind(out: &Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("an error line");
    let v: serde_json::Value = serde_json::from_str(line).expect("JSON error line");
    v["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn bad_arguments_exit_with_usage_error() {
    let out = loadcomb(&["run", "--window-days", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "usage");
}

#[test]
fn missing_config_is_reported_as_json() {
    let out = loadcomb(&["run", "--config", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "io");
}

#[test]
fn synth_run_report_dm() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let results = dir.path().join("results");
    let s = |p: &Path| p.to_str().unwrap().to_string();

    let out = loadcomb(&["synth", "--days", "30", "--seed", "3", "--out", &s(&data)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "window_days = 7\n[data]\nkind = \"dataset\"\ndir = \"data\"\n",
    )
    .unwrap();
    let out = loadcomb(&["run", "--config", &s(&config), "--out", &s(&results)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("gw") && table.contains("All"), "{table}");

    let out = loadcomb(&[
        "report",
        "--store",
        &s(&results),
        "--loss",
        "squared",
        "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["columns"].as_array().unwrap().last().unwrap(), "All");

    let out = loadcomb(&["dm", "--store", &s(&results), "--pair", "gw,provider"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 97);

    let out = loadcomb(&["dm", "--store", &s(&results), "--series", "Nowhere"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "invalid-argument");
}
