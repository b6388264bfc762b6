//! End-to-end checks of the command-line front end: exit codes, artifact
//! formats and byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lrdwave(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrdwave"))
        .args(args)
        .arg("--out")
        .arg(out_dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn help_exits_zero() {
    let out = Command::new(env!("CARGO_BIN_EXE_lrdwave"))
        .arg("--help")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("synth"));
    assert!(text.contains("scaling"));
}

#[test]
fn unknown_command_exits_64() {
    let out = Command::new(env!("CARGO_BIN_EXE_lrdwave"))
        .arg("frobnicate")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(64));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.to_lowercase().contains("usage") || text.contains("Usage"));
}

#[test]
fn invalid_config_exits_2_citing_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"d": 0.6, "n": 1024, "seed": 1}"#);
    let out = lrdwave(&["synth", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("0 < d < 1/2"), "stderr: {text}");
}

#[test]
fn k_versus_moments_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"d": 0.3, "n": 1024, "seed": 1, "K": 2, "family": "haar"}"#,
    );
    let out = lrdwave(&["synth", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("M >= K"));
}

#[test]
fn empty_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = lrdwave(&["synth", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_artifact_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"d": 0.35, "n": 512, "seed": 11, "G": {"hermite": 2}, "K": 1}"#,
    );
    let out = lrdwave(&["synth", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("one-line JSON summary");
    assert_eq!(summary["command"], "synth");

    let series = dir.path().join("series.csv");
    let text = fs::read_to_string(&series).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# lrdwave command=synth config="));
    assert!(header.contains("\"seed\":11"));
    assert_eq!(lines.next().unwrap(), "index,x,y");
    assert_eq!(text.lines().count(), 2 + 512);

    // byte-identical on re-run
    let first = fs::read(&series).unwrap();
    let out2 = lrdwave(&["synth", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out2.status.success());
    assert_eq!(first, fs::read(&series).unwrap());
    assert_eq!(out.stdout, out2.stdout);
}

#[test]
fn spectrum_stabilizes_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = lrdwave(
        &["spectrum", "--d", "0.35", "--q", "2", "--n-grid", "16384"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let variation = summary["relative_variation"].as_f64().unwrap();
    assert!(variation < 0.1, "variation {variation}");
    let csv = fs::read_to_string(dir.path().join("spectrum_q2.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("lambda,value"));
}

#[test]
fn filters_check_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = lrdwave(
        &["filters-check", "--family", "db2", "--levels", "10"],
        dir.path(),
    );
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["m"], 2);
    assert!(summary["c_hat"].as_f64().unwrap() > 0.0);
    assert_eq!(
        summary["limit_agreement"]["convergence_warning"],
        serde_json::Value::Bool(false)
    );
    assert!(dir.path().join("transfer.csv").exists());
}

#[test]
fn scaling_demo_contains_target() {
    let dir = tempfile::tempdir().unwrap();
    // the d = 0.35 / q0 = 2 demo at a small but meaningful size
    let cfg = write_config(
        dir.path(),
        r#"{"d": 0.35, "n": 16384, "seed": 5, "G": {"hermite": 2},
            "replicates": 24, "family": "db2", "levels": 6, "j_range": [2, 6]}"#,
    );
    let out = lrdwave(&["scaling", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let slope = summary["slope"].as_f64().unwrap();
    assert!((slope - 0.4).abs() < 0.15, "slope {slope}");
    assert!((summary["target_slope"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    let csv = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("j,gamma,count,var,se"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("scaling.json")).unwrap())
            .unwrap();
    assert!(json["report"]["scales"].as_array().unwrap().len() >= 3);
    assert_eq!(json["config"]["d"], 0.35);
}

#[test]
fn estimate_recovers_memory_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"d": 0.35, "n": 16384, "seed": 9, "replicates": 16,
            "family": "haar", "levels": 6, "j_range": [2, 5]}"#,
    );
    let out = lrdwave(&["estimate", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let est = summary["estimate"].as_f64().unwrap();
    assert!((est - 0.35).abs() < 0.08, "estimate {est}");
}

#[test]
fn limit_cov_block_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = lrdwave(
        &[
            "limit-cov", "--d", "0.35", "--q", "1", "--k", "0", "--family", "haar",
            "--m-max", "1", "--lag-max", "1",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["min_eigenvalue_ratio"].as_f64().unwrap() > -1e-8);
    let csv = fs::read_to_string(dir.path().join("limit_cov.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("m,k,mp,kp,cov,err"));
    // 4 indices -> 16 rows + comment + header
    assert_eq!(csv.lines().count(), 18);
}

#[test]
fn short_range_command_regime() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"d": 0.2, "n": 16384, "seed": 3, "G": {"hermite": 2},
            "replicates": 16, "family": "db2", "levels": 6, "j_range": [2, 6]}"#,
    );
    let out = lrdwave(&["short-range", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["long_range"], serde_json::Value::Bool(false));
    assert_eq!(summary["target_slope"].as_f64().unwrap(), 0.0);
}
