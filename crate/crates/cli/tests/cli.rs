use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn system(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../systems").join(name);
    root.to_str().unwrap().to_string()
}

fn hamosc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamosc")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn check_harmonic_above_threshold() {
    let harmonic = system("harmonic.json");
    let out = hamosc(&["check", "--system", &harmonic, "--window", "0", "3.15", "--criteria", "cor2.2", "--j", "1", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let reports = v["result"]["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0]["criterion"], "cor2.2");
    assert_eq!(reports[0]["j"], 1);
    assert_eq!(reports[0]["verdict"], "ProvenOscillatory");
    let margin = reports[0]["margin"].as_f64().unwrap();
    assert!((margin - (3.15 - std::f64::consts::PI)).abs() < 1e-9);
    assert!(v.get("generated_at_unix").is_none());
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config"]["options"]["grid"], 2048);
}

#[test]
fn check_harmonic_below_threshold() {
    let harmonic = system("harmonic.json");
    let out = hamosc(&["check", "--system", &harmonic, "--window", "0", "3.0", "--criteria", "cor2.2", "--j", "1", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    let report = &json(&out)["result"]["reports"][0];
    assert_eq!(report["verdict"], "Inconclusive");
    assert!((report["margin"].as_f64().unwrap() + 0.1416).abs() < 1e-4);
}

#[test]
fn default_criteria_cover_all_applicable_routes() {
    let harmonic = system("harmonic.json");
    let out = hamosc(&["check", "--system", &harmonic, "--window", "0", "3.2", "--grid", "256", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let ids: Vec<(String, i64)> = v["result"]["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["criterion"].as_str().unwrap().to_string(), r["j"].as_i64().unwrap()))
        .collect();
    let want: Vec<(String, i64)> = ["thm2.2", "thm2.4", "cor2.2"].iter().flat_map(|c| [(c.to_string(), 1), (c.to_string(), 2)]).collect();
    assert_eq!(ids, want);
    assert_eq!(v["config"]["criteria"], serde_json::json!(["thm2.2", "thm2.4", "cor2.2"]));
}

#[test]
fn ray_check_reports_divergence_evidence() {
    let singular = system("singular_b.json");
    let out = hamosc(&["check", "--system", &singular, "--horizon", "100", "--criteria", "thm2.3", "--j", "1", "--grid", "512", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    let report = &json(&out)["result"]["reports"][0];
    assert_eq!(report["verdict"], "DivergenceEvidence");
    assert_eq!(report["diagnostics"]["stages"].as_array().unwrap().len(), 8);
    assert_eq!(report["diagnostics"]["guard_activity"][0]["m"], 2);
}

#[test]
fn reports_are_byte_identical_without_timestamp() {
    let coupled = system("coupled.json");
    let args = ["check", "--system", &coupled, "--window", "0", "3", "--grid", "256", "--no-timestamp"];
    let a = hamosc(&args);
    let b = hamosc(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let harmonic = system("harmonic.json");
    let sim = ["simulate", "--system", &harmonic, "--horizon", "6", "--trials", "6", "--seed", "9", "--no-timestamp"];
    assert_eq!(hamosc(&sim).stdout, hamosc(&sim).stdout);
}

#[test]
fn timestamp_is_present_by_default() {
    let harmonic = system("harmonic.json");
    let out = hamosc(&["check", "--system", &harmonic, "--window", "0", "1", "--criteria", "cor2.2"]);
    assert!(json(&out)["generated_at_unix"].as_u64().unwrap() > 0);
}

#[test]
fn simulate_harmonic_finds_zeros_in_every_trial() {
    let harmonic = system("harmonic.json");
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    let out = hamosc(&[
        "simulate",
        "--system",
        &harmonic,
        "--horizon",
        "10",
        "--trials",
        "5",
        "--seed",
        "1",
        "--no-timestamp",
        "--trace-dir",
        traces.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["verdict"], "AllZero");
    let trials = v["result"]["trials"].as_array().unwrap();
    assert_eq!(trials.len(), 5);
    for trial in trials {
        assert!(trial["zeros"].as_array().unwrap().len() >= 3, "{trial}");
    }
    let events = std::fs::read_to_string(traces.join("events.csv")).unwrap();
    assert!(events.starts_with("trial,kind,status,t\n"));
    let trace = std::fs::read_to_string(traces.join("trial_000.csv")).unwrap();
    let header = trace.lines().next().unwrap();
    assert!(header.starts_with("t,phi_"));
    assert!(header.ends_with("sigma_min,conjoined_defect"));
}

#[test]
fn validate_passes_on_harmonic() {
    let harmonic = system("harmonic.json");
    let out = hamosc(&["validate", "--system", &harmonic, "--horizon", "5", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["result"]["all_passed"], true);
    assert_eq!(v["result"]["residuals"].as_array().unwrap().len(), 4);
}

#[test]
fn report_goes_to_file_with_out() {
    let harmonic = system("harmonic.json");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = hamosc(&["check", "--system", &harmonic, "--window", "0", "4", "--criteria", "cor2.2", "--no-timestamp", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["result"]["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn precondition_failures_exit_with_two() {
    let harmonic = system("harmonic.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["check", "--system", &harmonic, "--window", "0", "3", "--criteria", "cor2.1"],
        vec!["check", "--system", &harmonic, "--window", "0", "3", "--j", "3"],
        vec!["check", "--system", &harmonic, "--window", "3", "0"],
        vec!["check", "--system", &harmonic, "--window", "0", "3", "--criteria", "thm9.9"],
        vec!["check", "--system", &harmonic],
        vec!["check", "--system", "/nonexistent/system.json", "--window", "0", "3"],
        vec!["simulate", "--system", &harmonic, "--horizon", "3", "--trials", "0"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let out = hamosc(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = stderr_json(&out);
        assert!(err["kind"].is_string() && err["message"].is_string(), "{args:?}");
    }
}

#[test]
fn malformed_systems_report_located_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad_entry = dir.path().join("bad_entry.json");
    std::fs::write(&bad_entry, r#"{"n": 1, "t0": 0, "A": [["0"]], "B": [["2*+t"]], "C": [["-1"]]}"#).unwrap();
    let out = hamosc(&["check", "--system", bad_entry.to_str().unwrap(), "--window", "0", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "ParseError");
    assert!(err["message"].as_str().unwrap().starts_with("B[0][0]"), "{err}");

    let non_hermitian = dir.path().join("non_hermitian.json");
    std::fs::write(&non_hermitian, r#"{"n": 2, "t0": 0, "A": [["0","0"],["0","0"]], "B": [["1","0"],["0","1"]], "C": [["-1","1"],["0","-1"]]}"#).unwrap();
    let out = hamosc(&["check", "--system", non_hermitian.to_str().unwrap(), "--window", "0", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "HermitianViolation");

    let negative = dir.path().join("negative.json");
    std::fs::write(&negative, r#"{"n": 1, "t0": 0, "A": [["0"]], "B": [["-1"]], "C": [["-1"]]}"#).unwrap();
    let out = hamosc(&["check", "--system", negative.to_str().unwrap(), "--window", "0", "3", "--criteria", "cor2.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "PreconditionFailed");
}

#[test]
fn help_and_version_succeed() {
    let out = hamosc(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
    assert_eq!(hamosc(&["check", "--help"]).status.code(), Some(0));
}
