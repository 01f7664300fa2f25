use std::process::Command;

fn hilbq(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hilbq")).args(args).output().expect("binary runs")
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = hilbq(&["verify", "--suite", "everything"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn constants_table_rows() {
    let o = hilbq(&["emit", "constants", "--imax", "7", "--jmax", "4", "--format", "csv"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l == "b,5,0,2/5,computed"));
    let again = hilbq(&["emit", "constants", "--imax", "7", "--jmax", "4", "--format", "csv"]);
    assert_eq!(text.as_bytes(), again.stdout.as_slice());
}

#[test]
fn guarded_chern_character() {
    let o = hilbq(&["emit", "series", "--chk", "2", "--L", "L1", "--surface", "kpos"]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("inadmissible"), "{err}");
}

#[test]
fn theta_rows_as_json() {
    let o = hilbq(&["emit", "theta", "--k", "2", "--alpha", "point", "--qmax", "6"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["c"].as_str().unwrap().contains('/')));
}

#[test]
fn verify_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = hilbq(&[
        "verify",
        "--suite",
        "identities",
        "--qmax",
        "3",
        "--models",
        "minimal",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let reports = v.as_array().unwrap();
    assert!(reports.len() >= 10);
    assert!(reports.iter().all(|r| r["status"] == "pass" && r["Qmax"] == 3));
}

#[test]
fn model_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, r#"{"name": "file", "r": 1, "P": [["1"]], "K": ["0"], "lineBundles": {"L1": ["1"]}}"#).unwrap();
    let o = hilbq(&["verify", "--suite", "identities", "--qmax", "2", "--models", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let missing = hilbq(&["verify", "--models", "/nonexistent/model.json", "--qmax", "2"]);
    assert!(!missing.status.success());
}
