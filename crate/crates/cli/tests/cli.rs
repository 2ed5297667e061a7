use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wagner"))
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn write_manifest(dir: &Path, body: &str) -> PathBuf {
    let count = std::fs::read_dir(dir).unwrap().count();
    let p = dir.join(format!("manifest{count}.json"));
    std::fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &str, manifest: &Path, extra: &[&str]) -> (i32, Value) {
    let out = bin().arg(cmd).arg("--manifest").arg(manifest).args(extra).output().unwrap();
    let report: Value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (out.status.code().unwrap(), report)
}

const E1: &str = r#"{ "x": [0, 0, 0, 0, 0], "v": [1, 0, 0, 0] }"#;

#[test]
fn validate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_manifest(dir.path(), &format!(r#"{{ "m": 2, "chart": "HEIS5", "metric": "F_EUC", "points": [{E1}] }}"#));
    let (code, r) = run("validate", &good, &[]);
    assert_eq!(code, 0);
    assert_eq!(r["passed"], Value::Bool(true));

    let bad_metric = write_manifest(dir.path(), &format!(r#"{{ "m": 2, "chart": "HEIS5", "metric": {{ "expr": "v1^2 + v1" }}, "points": [{E1}] }}"#));
    let (code, r) = run("validate", &bad_metric, &[]);
    assert_eq!(code, 1);
    assert_eq!(r["validation"]["points"][0]["euler_residual"].as_f64().unwrap(), 0.5);

    let flat = write_manifest(dir.path(), &format!(r#"{{ "m": 2, "chart": {{ "gamma": ["0", "0", "0", "0"] }}, "metric": "F_EUC", "points": [{E1}] }}"#));
    let (code, r) = run("validate", &flat, &[]);
    assert_eq!(code, 1);
    assert!(r["validation"]["chart"]["degenerate"][0]["message"].as_str().unwrap().contains("degenerate"));
}

#[test]
fn unusable_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "{ not json",
        r#"{ "m": 2, "chart": "NOPE", "metric": "F_EUC" }"#,
        r#"{ "m": 2, "chart": "HEIS5", "metric": { "expr": "v1^2 + * v2" } }"#,
        r#"{ "m": 2, "chart": "HEIS5", "metric": "F_EUC", "points": [{ "x": [0, 0, 0], "v": [1, 0, 0, 0] }] }"#,
        r#"{ "m": 2, "chart": "HEIS5", "metric": "F_EUC", "points": [{ "x": [0, 0, 0, 0, 0], "v": [0, 0, 0, 0] }] }"#,
        r#"{ "m": 2, "chart": "HEIS5", "metric": "F_EUC", "options": { "eq22_sigma": -1 } }"#,
        r#"{ "m": 2, "chart": "HEIS5", "metric": "F_EUC", "surprise": 1 }"#,
    ] {
        let m = write_manifest(dir.path(), body);
        let (code, r) = run("eval", &m, &[]);
        assert_eq!(code, 2, "{body}");
        assert!(r["error"]["message"].is_string(), "{body}");
    }
    let (code, _) = run("eval", &dir.path().join("missing.json"), &[]);
    assert_eq!(code, 2);
}

#[test]
fn m1_requires_override() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), r#"{ "m": 1, "chart": { "gamma": ["-x2", "0"] }, "metric": { "expr": "v1^2 + v2^2" }, "points": [{ "x": [0, 0, 0], "v": [1, 0] }] }"#);
    assert_eq!(run("validate", &m, &[]).0, 2);
    let (code, r) = run("validate", &m, &["--allow-m1"]);
    assert_eq!(code, 0);
    assert_eq!(r["input"]["m"], 1);
}

#[test]
fn eval_warp5_and_euclid() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), &format!(r#"{{ "m": 2, "chart": "HEIS5", "metric": "WARP5", "points": [{E1}] }}"#));
    let (code, r) = run("eval", &m, &[]);
    assert_eq!(code, 0);
    let res = &r["points"][0]["result"];
    assert_eq!(res["G"][0][0].as_f64().unwrap(), 1.0);
    assert_eq!(res["max_abs_R_hor"].as_f64().unwrap(), 0.0);
    assert_eq!(res["max_abs_R_mixed"].as_f64().unwrap(), 0.0);
    assert!(res["K"].as_array().unwrap().iter().flat_map(|a| a.as_array().unwrap()).flat_map(|a| a.as_array().unwrap()).all(|k| k.as_f64() == Some(0.0)));
    assert_eq!(r["options"]["eq22_sigma"].as_f64().unwrap(), 1.0);
    assert_eq!(r["options"]["omega_inverse_convention"], "omega^{ab} omega_{bc} = delta^a_c");
}

#[test]
fn eval_is_blocked_by_failed_validation_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), r#"{ "m": 2, "chart": "HEIS5", "metric": { "expr": "v1^2 - v2^2 + v3^2 + v4^2" }, "points": [{ "x": [0, 0, 0, 0, 0], "v": [1, 0, 0, 0] }] }"#);
    let (code, r) = run("eval", &m, &[]);
    assert_eq!(code, 1);
    assert!(r["points"].is_null());
    let (code, r) = run("eval", &m, &["--force"]);
    assert_eq!(code, 1);
    assert!(r["points"][0]["error"].as_str().unwrap().contains("definite"));
}

#[test]
fn brackets_scan_transport() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), &format!(r#"{{ "m": 2, "chart": "HEIS5", "metric": "F_EUC", "points": [{E1}] }}"#));
    let (code, r) = run("brackets", &m, &[]);
    assert_eq!(code, 0);
    assert_eq!(r["max_abs_deviation"].as_f64().unwrap(), 0.0);
    assert_eq!(r["points"][0]["pairs"].as_array().unwrap().len(), 10);

    let curv = write_manifest(dir.path(), &format!(r#"{{ "m": 2, "chart": "HEIS5", "metric": "CURV5", "points": [{E1}] }}"#));
    let (code, r) = run("brackets", &curv, &[]);
    assert_eq!(code, 0, "{r}");
    let pair = &r["points"][0]["pairs"][0];
    assert_eq!(pair["pair"], "e1,e2");
    assert!((pair["formula"][1].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let warp = write_manifest(dir.path(), r#"{ "m": 2, "chart": "HEIS5", "metric": "WARP5", "options": { "seed": 5 }, "sample_box": { "x_lo": [-1, -1, -1, -1, -1], "x_hi": [1, 1, 1, 1, 1], "radius": [1, 1], "count": 12 } }"#);
    let (code, r) = run("scan", &warp, &[]);
    assert_eq!(code, 0);
    assert_eq!(r["classification"], "flat");
    let (_, r) = run("scan", &curv, &[]);
    assert_eq!(r["classification"], "non-flat");

    let body = r#"{ "m": 2, "chart": "HEIS5", "metric": "WARP5",
        "curves": [{ "name": "seg", "components": ["t", "0", "0", "0", "0"], "t_span": [0, 1], "samples": 1000, "v0": [1, 0, 0, 0] },
                   { "name": "up", "components": ["0", "0", "0", "0", "t"], "t_span": [0, 1], "samples": 10, "v0": [1, 0, 0, 0] }] }"#;
    let t = write_manifest(dir.path(), body);
    let traces = dir.path().join("traces");
    let (code, r) = run("transport", &t, &["--trace-dir", traces.to_str().unwrap()]);
    assert_eq!(code, 1, "the interior Reeb-line transport must fail");
    assert!(r["curves"][0]["f_drift"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["curves"][0]["conserved"], true);
    assert!(r["curves"][1]["error"].as_str().unwrap().contains("admissible"));
    let csv = std::fs::read_to_string(traces.join("seg.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,x3,x4,x5,v1,v2,v3,v4,F\n"));
    assert_eq!(csv.lines().count(), 1002);
}

fn max_numeric_gap(a: &Value, b: &Value, path: &str) -> f64 {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            (x - y).abs() / y.abs().max(1.0)
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "{path}");
            x.iter().zip(y).enumerate().map(|(i, (p, q))| max_numeric_gap(p, q, &format!("{path}[{i}]"))).fold(0.0, f64::max)
        }
        (Value::Object(x), Value::Object(y)) => {
            assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>(), "{path}");
            x.iter().map(|(k, p)| max_numeric_gap(p, &y[k], &format!("{path}.{k}"))).fold(0.0, f64::max)
        }
        _ => {
            assert_eq!(a, b, "{path}");
            0.0
        }
    }
}

#[test]
fn regression_files_match() {
    for (manifest, frozen) in [("manifest.json", "eval_default.json"), ("manifest_transpose.json", "eval_transpose.json")] {
        let (code, r) = run("eval", &repo().join("regression").join(manifest), &[]);
        assert_eq!(code, 0);
        let want: Value = serde_json::from_str(&std::fs::read_to_string(repo().join("regression").join(frozen)).unwrap()).unwrap();
        let gap = max_numeric_gap(&r, &want, "");
        assert!(gap <= 1e-12, "{frozen}: {gap}");
    }
}

#[test]
fn thread_count_does_not_change_reports() {
    let manifest = repo().join("regression/manifest.json");
    let outputs: Vec<Vec<u8>> = ["1", "3"]
        .iter()
        .map(|n| bin().env("WAGNER_THREADS", n).args(["brackets", "--manifest"]).arg(&manifest).output().unwrap().stdout)
        .collect();
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
    let bad = bin().env("WAGNER_THREADS", "zero").args(["eval", "--manifest"]).arg(&manifest).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
