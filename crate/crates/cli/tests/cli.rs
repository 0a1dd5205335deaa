//! Scripted invocations of the `cframe` binary: output shape and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const RAMP: &str = r#"{"frame": {"builtin": "example_2_3", "N": 6, "alpha": 1.0, "r": 2}}"#;

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn cframe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cframe")).args(args).env_remove("CFRAME_SEED").output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn bounds_of_the_ramp() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "ramp.json", RAMP);
    let out = cframe(&["bounds", path(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!((v["lower_A"].as_f64().unwrap() - 1.0 / 12.0).abs() < 1e-12);
    assert!((v["upper_B"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["lower_is_optimal"], Value::Bool(true));
    // 17 significant digits
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.0833333333333333"), "{text}");
}

#[test]
fn bounds_of_a_parseval_basis() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "basis.json",
        r#"{
            "quadrature": {"type": "counting", "n": 2},
            "frame": {"vectors": [
                {"signature": [1], "rank": 2, "entries": [[[[[1, 0]]]], [[[[0, 0]]]]]},
                {"signature": [1], "rank": 2, "entries": [[[[[0, 0]]]], [[[[1, 0]]]]]}
            ]},
            "K": {"builtin": "identity"}
        }"#,
    );
    let out = cframe(&["bounds", path(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["lower_A"].as_f64(), Some(1.0));
    assert_eq!(v["upper_B"].as_f64(), Some(1.0));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bad.json",
        r#"{"frame": {"builtin": "example_2_3", "N": 6, "alpha": 1.0, "r": 2}, "tolerances": {"psd": "tiny"}}"#,
    );
    let out = cframe(&["bounds", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("tolerances.psd"), "{}", stderr(&out));

    let cfg = write(
        &dir,
        "vectors.json",
        r#"{"quadrature": {"type": "counting", "n": 1}, "frame": {"vectors": [{"signature": [1], "rank": 1, "entries": "x"}]}}"#,
    );
    let out = cframe(&["bounds", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("vectors[0]"), "{}", stderr(&out));

    let cfg = write(&dir, "truncated.json", "{\"frame\": ");
    assert_eq!(cframe(&["verify", path(&cfg)]).status.code(), Some(2));
    assert_eq!(cframe(&["verify", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn verify_all_warns_about_the_norm_characterization() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "ramp.json", RAMP);
    let out = cframe(&["verify", path(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["schema"], "cframe-report/1");
    assert_eq!(v["summary"], "pass");
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 12, "T and M checks are skipped");
    let thm = reports.iter().find(|r| r["check"] == "thm-2.4").unwrap();
    assert_eq!(thm["verdict"], "hypotheses_not_met");
    assert!(v["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().starts_with("thm-2.4")));
    assert!(stderr(&out).contains("skipping thm-2.11"));

    let strict = cframe(&["verify", path(&cfg), "--strict-hypotheses"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn understated_upper_bound_fails_with_witness() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "ramp.json", RAMP);
    let out = cframe(&["verify", path(&cfg), "--checks", "def-2.2", "--assert-bounds", "0.08,0.2"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["summary"], "fail");
    let rep = &v["reports"][0];
    assert_eq!(rep["verdict"], "fail");
    assert_eq!(rep["conclusions"]["asserted_upper"]["pass"], Value::Bool(false));
    assert!(rep["witness"].is_object(), "{rep}");
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "ramp.json", RAMP);
    let a = cframe(&["verify", path(&cfg), "--seed", "42"]);
    let b = cframe(&["verify", path(&cfg), "--seed", "42"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["seed"], 42);
}

#[test]
fn seed_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg =
        write(&dir, "seeded.json", r#"{"frame": {"builtin": "example_2_3", "N": 4, "alpha": 1.0, "r": 2}, "seed": 5}"#);
    let plain = write(&dir, "plain.json", r#"{"frame": {"builtin": "example_2_3", "N": 4, "alpha": 1.0, "r": 2}}"#);
    let run = |cfg: &Path, extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_cframe"));
        cmd.args(["verify", path(cfg), "--checks", "def-2.1"]).args(extra).env_remove("CFRAME_SEED");
        if let Some(s) = env {
            cmd.env("CFRAME_SEED", s);
        }
        json(&cmd.output().unwrap())["seed"].as_u64().unwrap()
    };
    assert_eq!(run(&cfg, &["--seed", "9"], Some("3")), 9);
    assert_eq!(run(&cfg, &[], Some("3")), 5);
    assert_eq!(run(&plain, &[], Some("3")), 3);
    assert_eq!(run(&plain, &[], None), 0);
}

#[test]
fn selection_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "ramp.json", RAMP);
    for checks in ["", " , ", "def-9.9"] {
        let out = cframe(&["verify", path(&cfg), "--checks", checks]);
        assert_eq!(out.status.code(), Some(2), "--checks {checks:?}");
    }
    let out = cframe(&["verify", path(&cfg), "--checks", "thm-2.11"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("thm-2.11"));
    let out = cframe(&["report", path(&cfg), "--checks", "", "-o", path(&dir.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_file_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "ramp.json", RAMP);
    let out_path = dir.path().join("report.json");
    let out = cframe(&["report", path(&cfg), "-o", path(&out_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    assert_eq!(v["schema"], "cframe-report/1");
    assert_eq!(v["summary"], "pass");
    assert!((v["constants"]["A"].as_f64().unwrap() - 1.0 / 12.0).abs() < 1e-12);
    assert!((v["constants"]["B"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    let names: Vec<&str> = v["reports"].as_array().unwrap().iter().map(|r| r["check"].as_str().unwrap()).collect();
    assert_eq!(names[..3], ["def-2.1", "def-2.2", "thm-2.4"]);
}

#[test]
fn unwritable_report_path_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "ramp.json", RAMP);
    let out = cframe(&["report", path(&cfg), "-o", path(&dir.path().join("missing/dir/report.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn image_checks_with_operators() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "image.json",
        r#"{
            "schema": "cframe-config/1",
            "frame": {"builtin": "example_2_3", "N": 5, "alpha": 2.0, "r": 3},
            "T": {"builtin": "alpha_identity", "alpha": 1.5},
            "M": {"builtin": "coordinate_projection_r", "r": 2}
        }"#,
    );
    let out = cframe(&["verify", path(&cfg), "--checks", "thm-2.11,thm-2.13,prop-2.12,douglas"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let names: Vec<&str> = v["reports"].as_array().unwrap().iter().map(|r| r["check"].as_str().unwrap()).collect();
    assert_eq!(names, ["thm-2.11", "prop-2.12", "thm-2.13", "douglas"]);

    let wrong = write(
        &dir,
        "wrong.json",
        &std::fs::read_to_string(&cfg).unwrap().replace("cframe-config/1", "cframe-config/9"),
    );
    assert_eq!(cframe(&["bounds", path(&wrong)]).status.code(), Some(2));
}

#[test]
fn non_frame_bounds_exit_one() {
    let dir = TempDir::new().unwrap();
    // S = diag(1, 0) cannot dominate K K* = I.
    let cfg = write(
        &dir,
        "degenerate.json",
        r#"{
            "quadrature": {"type": "counting", "n": 1},
            "frame": {"vectors": [{"signature": [1, 1], "rank": 1, "entries": [[[[[1, 0]]], [[[0, 0]]]]]}]},
            "K": {"builtin": "identity"}
        }"#,
    );
    let out = cframe(&["bounds", path(&cfg)]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}
