//! End-to-end checks of the `oam-turb` binary: exit codes, the error
//! report on stderr and the files it writes.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oam-turb"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("oam-turb-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Last stderr line parsed as the JSON status document.
fn status(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("status line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("bad status `{line}`: {e}"))
}

fn assert_error(out: &Output, code: i32, kind: &str, path: Option<&str>) {
    assert_eq!(out.status.code(), Some(code), "{}", String::from_utf8_lossy(&out.stderr));
    let s = status(out);
    assert_eq!(s["status"], "error");
    assert_eq!(s["kind"], kind);
    assert!(s["message"].as_str().is_some_and(|m| !m.is_empty()));
    match path {
        Some(p) => assert_eq!(s["path"], p),
        None => assert!(s["path"].is_null()),
    }
}

#[test]
fn config_prints_the_effective_configuration() {
    let out = run(&["config", "--seed", "9", "--grid-n", "256", "--ao", "none,ideal"]);
    assert!(out.status.success());
    let cfg: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["seed"], 9);
    assert_eq!(cfg["grid"]["n"], 256);
    assert_eq!(cfg["ao_modes"], serde_json::json!(["none", "ideal"]));
    assert_eq!(status(&out)["status"], "ok");
}

#[test]
fn config_file_errors_carry_paths() {
    let dir = scratch("cfg");
    let file = dir.join("bad.json");
    std::fs::write(&file, r#"{"optics": {"wavelenght": 1e-6}}"#).unwrap();
    let out = run(&["config", "--config", file.to_str().unwrap()]);
    assert_error(&out, 2, "config", Some("optics.wavelenght"));

    std::fs::write(&file, r#"{"grid": {"n": 300}}"#).unwrap();
    let out = run(&["config", "--config", file.to_str().unwrap()]);
    assert_error(&out, 2, "config", Some("grid.n"));

    let missing = dir.join("absent.json");
    let out = run(&["config", "--config", missing.to_str().unwrap()]);
    assert_error(&out, 2, "config", Some("--config"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn bad_arguments_exit_with_usage_errors() {
    assert_error(&run(&["config", "--ao", "bogus"]), 2, "usage", None);
    assert_error(&run(&["reproduce", "fig9"]), 2, "usage", None);
    assert_error(&run(&["nonsense"]), 2, "usage", None);
    assert_error(&run(&["config", "--workers", "0"]), 2, "config", Some("workers"));
    assert_error(&run(&["spectrum"]), 2, "config", Some("spectrum.l0"));
    assert_error(&run(&["bell", "--subspace", "1,1"]), 2, "config", Some("subspaces[0]"));
    let out = run(&["reproduce", "fig3", "--config", "x.json"]);
    assert_error(&out, 2, "invalid_argument", None);
}

#[test]
fn bell_writes_csv_and_provenance() {
    let dir = scratch("bell");
    let csv = dir.join("nested").join("bell.csv");
    let out = run(&[
        "bell", "--grid-n", "256", "--realizations", "2", "--strengths", "0", "--ao", "none,tiptilt",
        "--subspace", "-1,1", "--subspace", "-1,0,1", "--out", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = status(&out);
    assert_eq!(s["records"], 4);
    assert_eq!(s["critical_strengths"].as_array().unwrap().len(), 4);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("W,d,correction_mode,S_d,stderr,violated,N"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[1], "2");
    assert_eq!(first[5], "true");
    assert!((first[3].parse::<f64>().unwrap() - 2.8284).abs() < 0.01);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("nested/bell.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["metadata"]["realizations"], 2);
    assert!(meta["metadata"]["build_id"].is_string());
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn entanglement_json_to_stdout() {
    let out = run(&[
        "entanglement", "--grid-n", "256", "--realizations", "1", "--strengths", "0", "--ao", "ideal",
        "--subspace=-2,0,2", "--format", "json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = doc["entanglement"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["d"], 3);
    assert_eq!(rows[0]["modes"], "-2;0;2");
    assert_eq!(rows[0]["measure"], "negativity");
    assert!(doc["metadata"]["geometry"]["aperture_radius"].is_number());
}

#[test]
fn spectrum_and_screen_validation_run() {
    let out = run(&[
        "spectrum", "--grid-n", "256", "--realizations", "1", "--strengths", "0", "--ao", "none", "--l0", "2",
        "--half-width", "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("l0,l,P,stderr_P,W,correction_mode,N"));
    assert_eq!(text.lines().count(), 4);

    let out = run(&["validate-screens", "--grid-n", "256", "--realizations", "4", "--strengths", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("r,D_measured,D_theory"));
    assert!(status(&out)["max_relative_error"].is_number());
}

#[test]
fn worker_count_does_not_change_output() {
    let args = [
        "entanglement", "--grid-n", "256", "--realizations", "3", "--strengths", "1.5", "--ao", "tiptilt",
    ];
    let one = bin().args(args).args(["--workers", "1"]).output().unwrap();
    let three = bin().args(args).args(["--workers", "3"]).output().unwrap();
    assert!(one.status.success() && three.status.success());
    assert_eq!(one.stdout, three.stdout);
}
