use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lumen-servo"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[control]\ndamping = 2.0\n");
    let out = run(&["centering", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("damping"));
}

#[test]
fn missing_config_exits_with_four() {
    let out = run(&["centering", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_path_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = run(&["navigate", "--config", &cfg, "--path", "E"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn centering_then_report_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[experiment]\nplots = true\n");
    let out_dir = dir.path().join("run");
    let out = run(&[
        "centering",
        "--config",
        &cfg,
        "--trials",
        "1",
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let aggregate = String::from_utf8(out.stdout).unwrap();
    assert!(aggregate.starts_with("path,metric,mean,std,n\n"));
    assert_eq!(
        std::fs::read_to_string(out_dir.join("aggregate.csv")).unwrap(),
        aggregate
    );
    for f in [
        "config.toml",
        "trials/trial_000.csv",
        "trials/trial_000.json",
        "plots/trial_000_ntr.svg",
    ] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let report = run(&["report", "--in", out_dir.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0));
    assert_eq!(String::from_utf8(report.stdout).unwrap(), aggregate);
}

#[test]
fn dataset_writes_the_requested_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[experiment]\ndataset_width = 32\ndataset_height = 24\n",
    );
    let out_dir = dir.path().join("data");
    let out = run(&[
        "dataset",
        "--config",
        &cfg,
        "--count",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let index = std::fs::read_to_string(out_dir.join("index.csv")).unwrap();
    assert_eq!(index.lines().count(), 3);
    assert!(out_dir.join("samples/000001_mask.pgm").is_file());
}
