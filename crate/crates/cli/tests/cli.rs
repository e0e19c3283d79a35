//! Fast end-to-end tests of the `sulfursense` binary: flag handling, exit
//! codes, and the cheap (analytic / file-based) subcommands. The expensive
//! simulation paths are covered by the `acceptance` test target.

use assert_cmd::Command;
use predicates::prelude::*;
use std::net::TcpListener;

fn bin() -> Command {
    Command::cargo_bin("sulfursense").expect("binary builds")
}

fn workspace_file(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

#[test]
fn model_default_sweep_has_8_monotone_rows() {
    let out = bin()
        .args(["model", "--thickness-sweep", "0:7:1"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let text = String::from_utf8(out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "thickness_mm,eps_e,fr_ghz,frac_shift");
    assert_eq!(rows.len(), 9, "header + 8 rows");
    let fr: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    for w in fr.windows(2) {
        assert!(w[1] < w[0], "fr not decreasing: {:?}", fr);
    }
}

#[test]
fn model_step_beyond_span_gives_two_endpoint_rows() {
    let out = bin()
        .args(["model", "--thickness-sweep", "0:7:10"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 3, "header + endpoints:\n{text}");
    assert!(text.lines().nth(1).unwrap().starts_with("0,"));
    assert!(text.lines().nth(2).unwrap().starts_with("7,"));
}

#[test]
fn model_rejects_unknown_config_key_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"geometry": {"resonant_length_mm": 9.7, "width_mm": 11.69, "patch_color": "yellow"},
            "stack": {"substrate": {"eps_r": 2.2, "h_mm": 0.508}}}"#,
    )
    .unwrap();
    bin()
        .args(["model", "--config", path.to_str().unwrap()])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("patch_color"));
}

#[test]
fn model_writes_csv_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.csv");
    bin()
        .args([
            "model",
            "--thickness-sweep",
            "0:2:2",
            "--out",
            path.to_str().unwrap(),
        ])
        .assert()
        .success();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("thickness_mm,"));
}

#[test]
fn invert_bundled_ar1_anchor() {
    let curve = workspace_file("data/calibration/ar1.csv");
    let out = bin()
        .args(["invert", "--curve", curve.to_str().unwrap(), "--freq", "8.30"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(v["thickness_mm"].as_f64().unwrap(), 7.0);
    assert_eq!(v["status"], "in-range");
}

#[test]
fn invert_above_onset_is_below_range() {
    let curve = workspace_file("data/calibration/ar1.csv");
    let out = bin()
        .args(["invert", "--curve", curve.to_str().unwrap(), "--freq", "11.0"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(v["status"], "below-range");
}

#[test]
fn invert_requires_exactly_one_source() {
    let curve = workspace_file("data/calibration/ar1.csv");
    bin()
        .args(["invert", "--curve", curve.to_str().unwrap()])
        .assert()
        .code(2);
}

#[test]
fn invert_extracts_dip_from_touchstone_input() {
    // Synthetic parabolic dip in dB centered at 9.65 GHz -> AR1 gives 2 mm.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("meas.s1p");
    let mut text = String::from("# GHz S DB R 50\n");
    let mut f = 9.0;
    while f <= 10.3 + 1e-9 {
        let db = -20.0 + 40.0 * (f - 9.65f64).powi(2);
        text.push_str(&format!("{f:.3} {db:.6} 0.0\n"));
        f += 0.01;
    }
    std::fs::write(&path, text).unwrap();
    let curve = workspace_file("data/calibration/ar1.csv");
    let out = bin()
        .args([
            "invert",
            "--curve",
            curve.to_str().unwrap(),
            "--input",
            path.to_str().unwrap(),
        ])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert!((v["thickness_mm"].as_f64().unwrap() - 2.0).abs() < 0.05);
}

#[test]
fn sweep_empty_range_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    bin()
        .args([
            "sweep",
            "--thickness",
            "5:2:1",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("empty range"));
}

#[test]
fn sweep_rejects_zero_jobs() {
    let dir = tempfile::tempdir().unwrap();
    bin()
        .args([
            "sweep",
            "--thickness",
            "0:2:1",
            "--jobs",
            "0",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ])
        .assert()
        .code(2);
}

#[test]
fn monitor_port_in_use_exits_nonzero() {
    let holder = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = holder.local_addr().unwrap().to_string();
    let dir = tempfile::tempdir().unwrap();
    let cal = dir.path().join("cal");
    std::fs::create_dir(&cal).unwrap();
    std::fs::copy(workspace_file("data/calibration/ar1.csv"), cal.join("AR1.csv")).unwrap();
    bin()
        .args([
            "monitor",
            "--listen",
            &addr,
            "--calibration",
            cal.to_str().unwrap(),
            "--journal",
            dir.path().join("journal.jsonl").to_str().unwrap(),
        ])
        .assert()
        .code(1);
}

#[test]
fn monitor_requires_calibration_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cal = dir.path().join("cal");
    std::fs::create_dir(&cal).unwrap();
    bin()
        .args([
            "monitor",
            "--listen",
            "127.0.0.1:0",
            "--calibration",
            cal.to_str().unwrap(),
            "--journal",
            dir.path().join("journal.jsonl").to_str().unwrap(),
        ])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("no calibration"));
}

#[test]
fn help_covers_every_subcommand() {
    for sub in ["model", "simulate", "sweep", "invert", "monitor"] {
        bin().args([sub, "--help"]).assert().success();
    }
}
