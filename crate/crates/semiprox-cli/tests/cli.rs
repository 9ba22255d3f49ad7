//! End-to-end tests of the `semiprox` binary: output formats, exit codes,
//! and the CSV round trip.

use std::path::Path;
use std::process::{Command, Output};

use semiprox::moreau;
use semiprox::penalty::{ExtReal, PenaltySpec};

const ABS_SPEC: &str = r#"{"a1":0.0,"a2":0.0,"b1":-1.0,"b2":1.0,"interval":null}"#;
const RELU_SPEC: &str = r#"{"a1":0.0,"a2":0.0,"b1":0.0,"b2":1.0,"interval":null}"#;
const BOX_SPEC: &str = r#"{"a1":0.0,"a2":0.0,"b1":-1.0,"b2":1.0,"interval":[-1.0,1.0]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semiprox"))
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn eval_reports_hard_threshold_zero_region() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "abs.json", ABS_SPEC);
    let out = bin()
        .args(["eval", "--spec", &spec, "--alpha", "1", "--beta", "4", "--x", "1.9"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let record: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(record["prox_semiconvex"]["kind"], "single");
    assert_eq!(record["prox_semiconvex"]["lo"], 0.0);
    assert_eq!(record["prox_semiconvex"]["set_valued"], false);
}

#[test]
fn eval_reports_relu_identity_branch() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "relu.json", RELU_SPEC);
    let out = bin()
        .args(["eval", "--spec", &spec, "--alpha", "2", "--beta", "1", "--x", "-5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let record: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(record["prox_semiconvex"]["lo"], -5.0);
    assert_eq!(record["prox_semiconvex"]["hi"], -5.0);
    assert_eq!(record["case"], "Reflected(B2Zero)");
    assert_eq!(record["f"], 0.0);
}

#[test]
fn eval_set_valued_pair_at_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "abs.json", ABS_SPEC);
    let out = bin()
        .args(["eval", "--spec", &spec, "--alpha", "1", "--beta", "4", "--x", "2"])
        .output()
        .unwrap();
    let record: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(record["prox_semiconvex"]["kind"], "pair");
    assert_eq!(record["prox_semiconvex"]["lo"], 0.0);
    assert_eq!(record["prox_semiconvex"]["hi"], 2.0);
}

#[test]
fn malformed_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "bad.json", "{not json");
    let out = bin()
        .args(["eval", "--spec", &spec, "--alpha", "1", "--beta", "1", "--x", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // Valid JSON, inadmissible coefficients.
    let spec = write(dir.path(), "bad2.json", r#"{"a1":0,"a2":0,"b1":1,"b2":1,"interval":null}"#);
    let out = bin()
        .args(["eval", "--spec", &spec, "--alpha", "1", "--beta", "1", "--x", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_numerics_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "abs.json", ABS_SPEC);
    let out = bin()
        .args(["eval", "--spec", &spec, "--alpha", "-1", "--beta", "1", "--x", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = bin()
        .args([
            "table", "--spec", &spec, "--alpha", "1", "--beta", "1", "--lo", "2", "--hi", "-2",
            "--n", "5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = bin()
        .args([
            "table", "--spec", &spec, "--alpha", "1", "--beta", "1", "--lo", "-2", "--hi", "2",
            "--n", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn table_reproduces_plateau_and_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "abs.json", ABS_SPEC);
    let out = bin()
        .args([
            "table", "--spec", &spec, "--alpha", "1", "--beta", "0.5", "--lo", "-3", "--hi",
            "3", "--n", "7",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.trim_end().lines().collect();
    assert_eq!(lines.len(), 8);
    assert_eq!(
        lines[0],
        "x,f,env,f_alpha,prox_base,prox_semi_lo,prox_semi_hi,set_valued,case"
    );
    let last: Vec<&str> = lines[7].split(',').collect();
    assert_eq!(last[0], "3");
    assert_eq!(last[3], "0.5");

    // n = 2 yields exactly the endpoints.
    let out = bin()
        .args([
            "table", "--spec", &spec, "--alpha", "1", "--beta", "0.5", "--lo", "-3", "--hi",
            "3", "--n", "2",
        ])
        .output()
        .unwrap();
    let text = stdout(&out);
    let xs: Vec<&str> = text
        .trim_end()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(xs, vec!["-3", "3"]);
}

#[test]
fn table_marks_indicator_violations_with_inf_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "box.json", BOX_SPEC);
    let out = bin()
        .args([
            "table", "--spec", &spec, "--alpha", "0.5", "--beta", "1", "--lo", "-2", "--hi",
            "2", "--n", "9",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let first_row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first_row[0], "-2");
    assert_eq!(first_row[1], "inf");
    assert_eq!(first_row[3], "inf");
    // Inside the interval the values are finite.
    assert!(text.lines().any(|l| l.starts_with("0,0,")));
}

#[test]
fn table_round_trips_f_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = write(dir.path(), "box.json", BOX_SPEC);
    let spec = PenaltySpec::from_json(BOX_SPEC).unwrap();
    let (alpha, beta) = (0.7, 1.3);
    let out = bin()
        .args([
            "table", "--spec", &spec_path, "--alpha", "0.7", "--beta", "1.3", "--lo", "-2.5",
            "--hi", "2.5", "--n", "101",
        ])
        .output()
        .unwrap();
    let _ = beta;
    let text = stdout(&out);
    for line in text.trim_end().lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let x: f64 = fields[0].parse().unwrap();
        let expected = moreau::eval_falpha(&spec, alpha, x);
        match expected {
            ExtReal::PosInf => assert_eq!(fields[3], "inf"),
            ExtReal::Finite(v) => {
                let parsed: f64 = fields[3].parse().unwrap();
                assert!(
                    (parsed - v).abs() <= 1e-12,
                    "round trip drift at x={x}: {parsed} vs {v}"
                );
            }
        }
    }
}

#[test]
fn check_passes_for_abs_and_fails_on_corrupt_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "abs.json", ABS_SPEC);
    let out = bin()
        .args([
            "check", "--spec", &spec, "--alpha", "1", "--beta", "4", "--samples", "60",
            "--seed", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("max deviation"));
    assert!(text.contains("PASS"));

    let corrupt = write(dir.path(), "corrupt.json", r#"{"a1":0}"#);
    let out = bin()
        .args(["check", "--spec", &corrupt, "--alpha", "1", "--beta", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_covers_breakpoints_for_firm_regime() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "abs.json", ABS_SPEC);
    let out = bin()
        .args([
            "check", "--spec", &spec, "--alpha", "2", "--beta", "1", "--samples", "40",
            "--seed", "7",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("breakpoints"));
}

fn write_identity_problem(dir: &Path) -> (String, String) {
    let x_csv = write(
        dir,
        "X.csv",
        "c0,c1,c2,c3,c4\n1,0,0,0,0\n0,1,0,0,0\n0,0,1,0,0\n0,0,0,1,0\n0,0,0,0,1\n",
    );
    let y_csv = write(dir, "y.csv", "y\n3\n0.5\n0\n-3\n0.2\n");
    (x_csv, y_csv)
}

#[test]
fn solve_identity_demo_recovers_support() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "abs.json", ABS_SPEC);
    let (x_csv, y_csv) = write_identity_problem(dir.path());
    // lambda = beta / n makes the solve equal one componentwise prox of y
    // with step beta.
    let out = bin()
        .args([
            "solve", "--X", &x_csv, "--y", &y_csv, "--spec", &spec, "--alpha", "1", "--beta",
            "0.5", "--lambda", "0.1", "--max-iter", "100000", "--tol", "1e-13",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["support"], serde_json::json!([0, 3]));
    assert_eq!(report["converged"], true);
    let gamma: Vec<f64> = report["gamma_hat"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!((gamma[0] - 3.0).abs() < 1e-8);
    assert!((gamma[3] + 3.0).abs() < 1e-8);
}

#[test]
fn solve_zero_lambda_is_least_squares() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "abs.json", ABS_SPEC);
    let (x_csv, y_csv) = write_identity_problem(dir.path());
    let out = bin()
        .args([
            "solve", "--X", &x_csv, "--y", &y_csv, "--spec", &spec, "--alpha", "1", "--beta",
            "0.5", "--lambda", "0", "--max-iter", "100000", "--tol", "1e-13",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    // With the identity design the least-squares solution is y itself.
    assert_eq!(report["support"], serde_json::json!([0, 1, 3, 4]));
    let gamma: Vec<f64> = report["gamma_hat"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (g, y) in gamma.iter().zip([3.0, 0.5, 0.0, -3.0, 0.2]) {
        assert!((g - y).abs() < 1e-8);
    }
}

#[test]
fn solve_precondition_violation_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "abs.json", ABS_SPEC);
    let (x_csv, y_csv) = write_identity_problem(dir.path());
    let out = bin()
        .args([
            "solve", "--X", &x_csv, "--y", &y_csv, "--spec", &spec, "--alpha", "1", "--beta",
            "1.5", "--lambda", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn solve_shape_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "abs.json", ABS_SPEC);
    let (x_csv, _) = write_identity_problem(dir.path());
    let y_short = write(dir.path(), "y_short.csv", "y\n1\n2\n3\n");
    let out = bin()
        .args([
            "solve", "--X", &x_csv, "--y", &y_short, "--spec", &spec, "--alpha", "1",
            "--beta", "0.5", "--lambda", "0.1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // Ragged CSV.
    let ragged = write(dir.path(), "ragged.csv", "a,b\n1,2\n3\n");
    let out = bin()
        .args([
            "solve", "--X", &ragged, "--y", &y_short, "--spec", &spec, "--alpha", "1",
            "--beta", "0.5", "--lambda", "0.1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
