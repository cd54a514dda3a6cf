use std::path::Path;
use std::process::{Command, Output};

fn cocycle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cocycle")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn seed19(dir: &Path) -> std::path::PathBuf {
    let file = dir.join("seed19.json");
    let out = cocycle(&[
        "gen", "--kind", "prescribed_moduli", "--dim", "2", "--period", "600", "--bound", "1.5", "--seed", "19", "--moduli", "0.5,3",
        "-o", path_str(&file),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    file
}

#[test]
fn analyze_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let file = seed19(dir.path());
    let out = cocycle(&["analyze", path_str(&file)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("I = [1]"), "{text}");
    assert!(text.contains("J = [1]"), "{text}");
    assert!(text.contains("saddle: true"), "{text}");
    let out = cocycle(&["analyze", path_str(&file), "--json"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["saddle"], serde_json::json!(true));
}

#[test]
fn pipeline_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let file = seed19(dir.path());
    let result = dir.path().join("out.json");
    let out = cocycle(&["pipeline", path_str(&file), "--epsilon", "0.1", "--N", "8", "--seed", "19", "-o", path_str(&result)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = cocycle(&["verify", path_str(&result)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8(out.stdout).unwrap().contains("pass"));
}

#[test]
fn dominated_input_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("dom.json");
    std::fs::write(&file, r#"{"v": 1, "dim": 2, "period": 1, "matrices": [[0.25, 0.0, 0.0, 4.0]]}"#).unwrap();
    let out = cocycle(&["small-angle", path_str(&file), "--epsilon", "0.01"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("dominated"));
    let out = cocycle(&["dominate", path_str(&file), "--max-N", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("1-dominated"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = cocycle(&["analyze", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("parse error"));
    assert_eq!(cocycle(&["transmogrify"]).status.code(), Some(2));
    assert_eq!(cocycle(&["realify"]).status.code(), Some(2));
}

#[test]
fn connection_commands() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    let h = dir.path().join("h.json");
    std::fs::write(
        &g,
        r#"{"v": 1, "dim": 2, "outer": [0.5, 0.0, 0.0, 2.0], "inner": [0.5, 0.01, 0.01, 2.0], "r_in": 0.5, "r_out": 1.0, "profile": "plateau"}"#,
    )
    .unwrap();
    std::fs::write(
        &h,
        r#"{"v": 1, "dim": 2, "outer": [0.5, 0.01, 0.01, 2.0], "inner": [0.51, 0.01, 0.015, 1.99], "r_in": 0.5, "r_out": 1.0, "profile": "plateau"}"#,
    )
    .unwrap();
    let out = cocycle(&["glue", path_str(&g)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("Lip"));

    let joined = dir.path().join("gh.json");
    // without shrinking, h does not fit inside g
    assert_eq!(cocycle(&["concat", path_str(&g), path_str(&h)]).status.code(), Some(1));
    let out = cocycle(&["concat", path_str(&g), path_str(&h), "--lambda", "0.25", "-o", path_str(&joined)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let out = cocycle(&["size", path_str(&joined), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let size = doc["size"]["size"].as_f64().unwrap();
    assert!(size > 0.0 && size < 0.5);

    let out = cocycle(&["member", path_str(&g), "--point", "0,-3", "--index", "1", "--window", "0.6,0.9"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("member: false"));
}

#[test]
fn gen_is_deterministic() {
    let a = cocycle(&["gen", "--kind", "det_one_2d", "--dim", "2", "--period", "5", "--bound", "2", "--seed", "3"]);
    let b = cocycle(&["gen", "--kind", "det_one_2d", "--dim", "2", "--period", "5", "--bound", "2", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let bad = cocycle(&["gen", "--kind", "prescribed_moduli", "--dim", "2", "--period", "2", "--bound", "1.5", "--moduli", "0.1,10"]);
    assert_eq!(bad.status.code(), Some(1));
}
