//! Exit codes and file formats of the `flsat` binary.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("flsat-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_flsat")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn gen_to(dir: &Path, name: &str, args: &[&str]) -> String {
    let (code, text) = run(args);
    assert_eq!(code, 0, "{args:?}");
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn example_one_solves_but_has_no_small_model() {
    let dir = scratch("phi1");
    let phi1 = gen_to(&dir, "phi1.fl", &["gen", "phi1"]);
    let (code, out) = run(&["solve", &phi1, "--max-omega", "4", "--depth", "4", "--json"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["format"], 1);
    assert_eq!(v["status"], "sat");
    assert_eq!(v["prefix_clean"], true);
    assert_eq!(run(&["oracle", &phi1, "--max-size", "5"]).0, 1);
}

#[test]
fn solve_artifacts_validate_and_synthesize() {
    let dir = scratch("artifacts");
    let phi1 = gen_to(&dir, "phi1.fl", &["gen", "phi1"]);
    let out = dir.join("out");
    assert_eq!(run(&["solve", &phi1, "--out", out.to_str().unwrap()]).0, 0);
    let basic = out.join("quadratic.basic");
    let cert = out.join("certificate.json");
    assert_eq!(run(&["certify", basic.to_str().unwrap(), "--check", cert.to_str().unwrap()]).0, 0);
    let (code, prefix) =
        run(&["synthesize", cert.to_str().unwrap(), "--depth", "3", "--basic", basic.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&prefix).unwrap();
    assert_eq!(v["report"]["clean"], true);
    assert_eq!(v["depth"], 3);
}

#[test]
fn torus_model_checks_against_the_grid_formula() {
    let dir = scratch("torus");
    let ts = dir.join("ts.json");
    std::fs::write(&ts, r#"{"tiles": ["w"], "h": [["w","w"]], "v": [["w","w"]], "initial": "w", "final": "w"}"#).unwrap();
    let ts = ts.to_str().unwrap();
    let formula = gen_to(&dir, "grid2t.fl", &["gen", "grid2t", "--tiling", ts]);
    let model = gen_to(&dir, "torus.json", &["gen", "grid2t", "--tiling", ts, "--torus", "1"]);
    assert_eq!(run(&["check", "--model", &model, &formula]).0, 0);
    let larger = gen_to(&dir, "torus2.json", &["gen", "grid2t", "--tiling", ts, "--torus", "2"]);
    assert_eq!(run(&["check", "--model", &larger, &formula]).0, 1);
}

#[test]
fn seeded_generation_is_reproducible() {
    let a = run(&["gen", "random-sentence", "--seed", "17"]);
    let b = run(&["gen", "random-sentence", "--seed", "17"]);
    assert_eq!(a, b);
    assert_eq!(a.0, 0);
}

#[test]
fn usage_and_input_errors_exit_with_three() {
    assert_eq!(run(&["frobnicate"]).0, 3);
    assert_eq!(run(&["oracle", "/nonexistent/file.fl"]).0, 3);
    let dir = scratch("errors");
    let bad = dir.join("bad.fl");
    std::fs::write(&bad, "sig { p/1 } trans { T } eq\n(forall (p &").unwrap();
    assert_eq!(run(&["oracle", bad.to_str().unwrap()]).0, 3);
    let phi2 = gen_to(&dir, "phi2.fl", &["gen", "phi2"]);
    assert_eq!(run(&["solve", &phi2]).0, 3);
}

#[test]
fn normalize_writes_provenance() {
    let dir = scratch("normalize");
    let f = dir.join("f.fl");
    std::fs::write(&f, "sig { p/1, r/2, s/3 } trans { T } eq\n(forall forall (r -> exists s))").unwrap();
    let prov = dir.join("prov.json");
    let (code, text) = run(&["normalize", f.to_str().unwrap(), "--provenance", prov.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(text.starts_with("sig {"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(prov).unwrap()).unwrap();
    assert_eq!(v["format"], 1);
    assert_eq!(v["m"], 3);
    let (code, two) = run(&["normalize", f.to_str().unwrap(), "--two", "--json"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&two).unwrap();
    assert!(v["formula"].as_str().unwrap().starts_with("sig {"));
}
