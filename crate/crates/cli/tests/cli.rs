//! End-to-end tests of the curveflow binary: exit codes, artifact layout,
//! CSV determinism, and the report/plot round trip.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn curveflow(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_curveflow"));
    cmd.args(args);
    // An inherited output root would leak artifacts into the checkout.
    cmd.env_remove("CURVEFLOW_OUT");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary should spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Five quick steps of a relaxing two-fold curve, no checks selected.
fn tiny_config(dir: &Path, name: &str, checks: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    let body = format!(
        r#"{{
            "name": "{name}",
            "flow": "lp",
            "curve": {{
                "kind": "perturbed_n_circle",
                "radius": 1.0, "rotation": 2, "mode": 5, "amplitude": 0.05
            }},
            "n_nodes": 128,
            "policy": {{ "t_max": 0.05, "dt_max": 0.01, "c_cfl": 0.1 }},
            "sample_every": 1,
            "checks": {checks}
        }}"#
    );
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn identical_config_gives_byte_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tiny_config(tmp.path(), "tiny", "[]");
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");

    let run_a = curveflow(
        &["run", "--config", config.to_str().unwrap(), "--out", out_a.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&run_a), 0, "stderr: {}", text(&run_a.stderr));
    // Second run routes through $CURVEFLOW_OUT instead of --out.
    let run_b = curveflow(
        &["run", "--config", config.to_str().unwrap()],
        &[("CURVEFLOW_OUT", out_b.as_path())],
    );
    assert_eq!(code(&run_b), 0, "stderr: {}", text(&run_b.stderr));

    let csv_a = fs::read(out_a.join("trajectory.csv")).unwrap();
    let csv_b = fs::read(out_b.join("tiny").join("trajectory.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b, "repeated runs must emit identical bytes");

    for artifact in ["config.json", "verdict.json", "summary.txt"] {
        assert!(out_a.join(artifact).exists(), "{artifact} missing");
    }
    assert!(text(&run_a.stdout).contains("PASS: 0/0 checks passed"));
}

#[test]
fn unknown_preset_exits_two_and_lists_the_catalogue() {
    let out = curveflow(&["run", "--preset", "no-such-thing"], &[]);
    assert_eq!(code(&out), 2);
    let err = text(&out.stderr);
    assert!(err.contains("unknown preset"), "stderr: {err}");
    assert!(err.contains("rates-blowup"), "stderr: {err}");
}

#[test]
fn run_requires_exactly_one_source() {
    assert_eq!(code(&curveflow(&["run"], &[])), 2);
    let tmp = tempfile::tempdir().unwrap();
    let config = tiny_config(tmp.path(), "tiny", "[]");
    let both = curveflow(
        &["run", "--config", config.to_str().unwrap(), "--preset", "identities"],
        &[],
    );
    assert_eq!(code(&both), 2);
}

#[test]
fn malformed_config_exits_two_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("broken.json");
    fs::write(&path, "{ \"name\": \"x\",\n  \"flow\": what }").unwrap();
    let out = curveflow(&["run", "--config", path.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 2);
    assert!(text(&out.stderr).contains("line 2"), "stderr: {}", text(&out.stderr));
}

#[test]
fn report_and_plot_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tiny_config(tmp.path(), "tiny", "[]");
    let out_dir = tmp.path().join("run");
    let run = curveflow(
        &["run", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&run), 0, "stderr: {}", text(&run.stderr));

    let report = curveflow(&["report", out_dir.to_str().unwrap()], &[]);
    assert_eq!(code(&report), 0);
    assert!(text(&report.stdout).contains("PASS: 0/0 checks passed"));

    let plot = curveflow(&["plot", out_dir.to_str().unwrap()], &[]);
    assert_eq!(code(&plot), 0, "stderr: {}", text(&plot.stderr));
    let svg = fs::read_to_string(out_dir.join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));

    let empty = tmp.path().join("nothing-here");
    fs::create_dir(&empty).unwrap();
    assert_eq!(code(&curveflow(&["report", empty.to_str().unwrap()], &[])), 2);
    assert_eq!(code(&curveflow(&["plot", empty.to_str().unwrap()], &[])), 2);
}

#[test]
fn failed_check_exits_one_and_report_agrees() {
    let tmp = tempfile::tempdir().unwrap();
    // The finite-time bound needs a negative starting gap; this curve's gap
    // is positive, so the blow-up check lands as a failure in the verdict.
    let config = tiny_config(tmp.path(), "wrongsign", r#"[{ "blow_up": { "fit_rates": false } }]"#);
    let out_dir = tmp.path().join("run");
    let run = curveflow(
        &["run", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&run), 1, "stderr: {}", text(&run.stderr));
    assert!(text(&run.stdout).contains("FAIL"));

    let report = curveflow(&["report", out_dir.to_str().unwrap()], &[]);
    assert_eq!(code(&report), 1);
}

#[test]
fn identities_preset_passes_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("identities");
    let run = curveflow(
        &["run", "--preset", "identities", "--out", out_dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&run), 0, "stderr: {}", text(&run.stderr));
    let verdict: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("verdict.json")).unwrap()).unwrap();
    let checks = verdict["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 13);
    assert!(checks.iter().all(|c| c["pass"].as_bool().unwrap()));
    assert!(out_dir.join("ensemble.csv").exists());
    // A static suite records no trajectory.
    assert!(!out_dir.join("trajectory.csv").exists());
}

#[test]
fn preset_list_prints_every_name() {
    let out = curveflow(&["run", "--preset", "list"], &[]);
    assert_eq!(code(&out), 0);
    let stdout = text(&out.stdout);
    for name in ["identities", "inequalities", "stationary", "ap-blowup-n2", "jp-decay-n2"] {
        assert!(stdout.contains(name), "missing {name} in: {stdout}");
    }
}
