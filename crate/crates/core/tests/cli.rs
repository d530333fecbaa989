use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Runs the binary and returns `(exit code, parsed JSON report)`.
fn run_json(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_rbsos"))
        .args(args)
        .arg("--json")
        .output()
        .expect("binary runs");
    let text = String::from_utf8(out.stdout).expect("utf-8 output");
    let report: Value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("bad JSON ({e}): {text}"));
    validate(&schema(), &report, "$");
    (out.status.code().expect("exit code"), report)
}

fn run_text(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rbsos"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
    )
}

fn schema() -> Value {
    let path = format!("{}/schema/report.schema.json", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn type_matches(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        other => panic!("schema type {other} not supported by the test validator"),
    }
}

/// Checks the schema keywords used by the published report schema.
fn validate(schema: &Value, v: &Value, at: &str) {
    if let Some(ty) = schema.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(t, v),
            Value::Array(ts) => ts.iter().any(|t| type_matches(t.as_str().unwrap(), v)),
            _ => panic!("bad type keyword"),
        };
        assert!(ok, "{at}: {v} does not have type {ty}");
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        assert!(options.contains(v), "{at}: {v} not in {options:?}");
    }
    if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
        assert!(v.as_f64().unwrap() >= min, "{at}: {v} below {min}");
    }
    if let Some(obj) = v.as_object() {
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            assert!(obj.contains_key(key.as_str().unwrap()), "{at}: missing {key}");
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, child) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(s) => validate(s, child, &format!("{at}.{k}")),
                None => assert!(
                    schema.get("additionalProperties") != Some(&Value::Bool(false)),
                    "{at}: unexpected field {k}"
                ),
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), v.as_array()) {
        for (i, child) in arr.iter().enumerate() {
            validate(items, child, &format!("{at}[{i}]"));
        }
    }
}

#[test]
fn farkas_disk_example_has_no_certificate() {
    let (code, text) = run_text(&["check-farkas", &fixture("disk_farkas.json")]);
    assert_eq!(code, 0);
    assert!(
        text.contains("implication: holds (sampled); certificate: none; closedness: unknown"),
        "{text}"
    );
    let (_, r) = run_json(&["check-farkas", &fixture("disk_farkas.json")]);
    assert_eq!(r["details"]["exact_system_status"], "Infeasible");
}

#[test]
fn farkas_trivial_certificate_is_printed() {
    let (code, r) = run_json(&["check-farkas", &fixture("trivial_farkas.json")]);
    assert_eq!(code, 0);
    assert_eq!(r["status"], "certificate");
    assert_eq!(r["certificates"][0]["verified"], true);
    let l0 = r["certificates"][0]["multipliers"]["lambda0"][0].as_f64().unwrap();
    assert!((l0 - 1.0).abs() < 1e-6);
}

#[test]
fn farkas_flags_override_the_file() {
    // x <= 1 does not imply x >= 2.
    let (code, r) = run_json(&["check-farkas", &fixture("trivial_farkas.json"), "--p", "1", "--r", "2"]);
    assert_eq!(code, 0);
    assert_eq!(r["status"], "no_certificate");
    assert_eq!(r["details"]["implication"]["holds"], false);
}

#[test]
fn malformed_files_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n \"n\": }").unwrap();
    let bad = bad.to_str().unwrap();
    for cmd in ["solve", "check-feasible", "check-lower", "certify", "check-farkas"] {
        let (code, r) = run_json(&[cmd, bad]);
        assert_eq!(code, 2, "{cmd}");
        assert_eq!(r["status"], "input_error");
        assert!(r["summary"].as_str().unwrap().contains("line 2"), "{}", r["summary"]);
    }
    let (code, _) = run_text(&["check-feasible", "/nonexistent/problem.json"]);
    assert_eq!(code, 2);
}

#[test]
fn dimension_mismatch_exits_with_two() {
    let (code, r) = run_json(&["check-feasible", &fixture("ep2.json"), "--x", "0,1", "--y", "0"]);
    assert_eq!(code, 2);
    assert!(r["summary"].as_str().unwrap().contains("dimensions"));
}

#[test]
fn ep3_solve_reports_minus_two() {
    let (code, r) = run_json(&["solve", &fixture("ep3.json"), "--kmin", "4", "--kmax", "4"]);
    assert_eq!(code, 0);
    let v = &r["values"][0];
    assert_eq!(v["k"], 4);
    assert!((v["val"].as_f64().unwrap() + 2.0).abs() < 1e-3);
}

#[test]
fn ep1_solve_is_gated_by_lsc() {
    let (code, r) = run_json(&["solve", &fixture("ep1.json"), "--kmin", "2", "--kmax", "2"]);
    assert_eq!(code, 4);
    assert_eq!(r["status"], "hypotheses_failed");
    assert!(r["warnings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|w| w.as_str().unwrap().contains("LSC violated")));

    let (code, r) = run_json(&["solve", &fixture("ep1.json"), "--kmin", "2", "--kmax", "2", "--force"]);
    assert_eq!(code, 0);
    assert_eq!(r["details"]["forced"], true);
    // The relaxation stays below f(0,0) = -2 since LSC fails.
    assert!(r["values"][0]["val"].as_f64().unwrap() < -2.5);
}

#[test]
fn ep2_point_checks() {
    let (code, r) = run_json(&["check-feasible", &fixture("ep2.json"), "--x", "0", "--y", "0"]);
    assert_eq!(code, 0);
    assert_eq!(r["status"], "feasible");

    let (code, r) = run_json(&["check-lower", &fixture("ep2.json"), "--x", "0", "--y", "-1"]);
    assert_eq!(code, 0);
    assert_eq!(r["details"]["is_solution"], false);
    assert_eq!(r["details"]["closedness"], "polytope");
    // The extreme-point oracle puts the lower-level optimum at y = 0.
    let z = r["details"]["oracle"]["z"][0].as_f64().unwrap();
    assert!(z.abs() < 1e-6);
}

#[test]
fn ep1_certify_finds_nothing_and_explains() {
    let (code, r) = run_json(&["certify", &fixture("ep1.json"), "--x", "0", "--y", "0", "--k", "6"]);
    assert_eq!(code, 0);
    assert_eq!(r["status"], "none");
    assert!(r["summary"].as_str().unwrap().contains("below"));
    assert!(r["certificates"].as_array().unwrap().is_empty());
}

#[test]
fn ep3_certify_writes_multiplier_literals() {
    let (code, r) = run_json(&["certify", &fixture("ep3.json"), "--x", "0", "--y", "0", "--k", "6"]);
    assert_eq!(code, 0);
    assert_eq!(r["status"], "certified");
    let cert = &r["certificates"][0]["certificate"];
    assert_eq!(cert["multipliers"]["variables"].as_array().unwrap().len(), 5);
    let term = &cert["multipliers"]["sigma0"]["polynomial"][0];
    assert_eq!(term["exponents"].as_array().unwrap().len(), 5);
    assert!(cert["identity_residual"].as_f64().unwrap() <= 1e-6 * 5.0);
}

#[test]
fn dump_sdp_writes_level_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out: PathBuf = dir.path().join("dump");
    let (code, _) = run_json(&[
        "solve",
        &fixture("ep3.json"),
        "--kmin",
        "4",
        "--kmax",
        "4",
        "--dump-sdp",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let sdp = std::fs::read_to_string(out.join("level_k4.sdp")).unwrap();
    assert!(sdp.starts_with("* minimize"));
    assert!(sdp.contains("rows 126"));
    let mult: Value = serde_json::from_str(&std::fs::read_to_string(out.join("multipliers_k4.json")).unwrap()).unwrap();
    assert_eq!(mult["sigma"].as_array().unwrap().len(), 6);
    assert_eq!(mult["xi"].as_array().unwrap().len(), 2);
}

#[test]
fn odd_degrees_are_rounded_with_a_warning() {
    let (code, r) = run_json(&["solve", &fixture("ep3.json"), "--kmin", "3", "--kmax", "3"]);
    assert_eq!(code, 0);
    assert_eq!(r["values"][0]["k"], 4);
    assert!(r["warnings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|w| w.as_str().unwrap().contains("odd")));
}
