use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn hmod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmod")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn shear_with(edit: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(&stdout(&hmod(&["show", "shear"]))).unwrap();
    edit(&mut v);
    v.to_string()
}

fn run_file(dir: &tempfile::TempDir, text: &str, extra: &[&str]) -> Output {
    let path = dir.path().join("scenario.json");
    std::fs::write(&path, text).unwrap();
    let mut args = vec!["run", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    hmod(&args)
}

#[test]
fn list_is_stable_and_complete() {
    let out = hmod(&["list"]);
    assert_eq!(code(&out), 0);
    let names: Vec<String> = stdout(&out).lines().map(String::from).collect();
    assert_eq!(
        names,
        [
            "annulus-horizontal",
            "annulus-vertical",
            "plane-annulus-circular",
            "plane-annulus-radial",
            "plane-rectangle",
            "shear",
            "triple-kernel-residuals"
        ]
    );
    assert_eq!(stdout(&hmod(&["list"])), stdout(&out));
}

#[test]
fn shear_run_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let csv = dir.path().join("c.csv");
    let out = hmod(&["run", "shear", "--report", report.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = read_json(&report);
    assert_eq!(r["name"], "shear");
    assert!((r["modulus"].as_f64().unwrap() - 1.5 * 3.0 / 8.0).abs() < 1e-10);
    assert!(r["error_estimate"].as_f64().unwrap() >= 0.0);
    let checks = r["checks"].as_array().unwrap();
    assert!(checks.len() >= 8);
    for c in checks {
        assert_eq!(c["pass"], true, "{c}");
        assert!(c["threshold"].is_number());
    }
    let conv = r["convergence"].as_array().unwrap();
    assert!(conv.len() >= 2);
    assert_eq!(conv.last().unwrap()[0].as_f64().unwrap(), 1e-10);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("tol,value\n"));
    assert_eq!(table.lines().count(), conv.len() + 1);
}

#[test]
fn reports_are_deterministic_apart_from_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("r{k}.json"));
        assert_eq!(code(&hmod(&["run", "shear", "--report", path.to_str().unwrap()])), 0);
        let mut v = read_json(&path);
        v.as_object_mut().unwrap().remove("timestamp");
        texts.push(serde_json::to_string_pretty(&v).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn stdout_report_without_flag() {
    let out = hmod(&["run", "plane-rectangle"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["modulus"].as_f64().unwrap() - 1.5).abs() < 1e-10);
}

#[test]
fn plane_and_residual_builtins_pass() {
    for name in ["plane-annulus-radial", "plane-annulus-circular", "triple-kernel-residuals"] {
        let out = hmod(&["run", name, "--no-convergence"]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
    }
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_file(&dir, "{ not json", &[])), 2);
    assert_eq!(code(&hmod(&["run", "no-such-scenario"])), 2);
    let bad_expr = shear_with(|v| v["q"] = "1 +".into());
    let out = run_file(&dir, &bad_expr, &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("q:"));
    let empty_range = shear_with(|v| v["foliation"]["s_range"] = serde_json::json!([2, 1]));
    assert_eq!(code(&run_file(&dir, &empty_range, &[])), 2);
    let unknown = shear_with(|v| v["colour"] = "red".into());
    assert_eq!(code(&run_file(&dir, &unknown, &[])), 2);
    let bad_check = shear_with(|v| v["checks"] = serde_json::json!(["b3"]));
    assert_eq!(code(&run_file(&dir, &bad_check, &[])), 2);
    assert_eq!(code(&hmod(&["run", "shear", "--tol", "-1"])), 2);
    assert_eq!(code(&hmod(&["run", "shear", "--bogus"])), 2);
}

#[test]
fn failed_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let wrong = shear_with(|v| v["expected"]["modulus"]["value"] = 0.5.into());
    let out = run_file(&dir, &wrong, &["--no-convergence"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("expected_modulus"));
}

#[test]
fn b2_gate_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let text = shear_with(|v| {
        v["q"] = "1 + t^2".into();
        v["checks"] = serde_json::json!(["b2"]);
        v["expected"] = serde_json::json!({});
    });
    let report = dir.path().join("r.json");
    let out = run_file(&dir, &text, &["--report", report.to_str().unwrap(), "--no-convergence"]);
    assert_eq!(code(&out), 1);
    let r = read_json(&report);
    assert!(r["modulus"].is_null());
    assert!(r["checks"][0]["detail"].as_str().unwrap().contains("NotInKernelB2"));

    let out = run_file(&dir, &text, &["--report", report.to_str().unwrap(), "--no-convergence", "--override-b2-check"]);
    assert_eq!(code(&out), 1, "b2 check itself still fails");
    let r = read_json(&report);
    assert!(r["modulus"].as_f64().unwrap() > 0.0);
    assert!(!r["report"]["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn tolerance_flags_override_scenario() {
    let out = hmod(&["run", "plane-rectangle", "--tol", "1e-8", "--rk-tol", "1e-7", "--no-convergence"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["tolerances"]["quad_tol"], 1e-8);
    assert_eq!(v["tolerances"]["rk_tol"], 1e-7);
}

fn parse_csv(text: &str) -> Vec<[f64; 5]> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,re_z,im_z,t,leg_residual"));
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3], v[4]]
        })
        .collect()
}

#[test]
fn trace_constant_is_a_straight_line() {
    let out = hmod(&["trace", "--q", "1", "--start", "0,0,0", "--max-length", "2"]);
    assert_eq!(code(&out), 0);
    let rows = parse_csv(&stdout(&out));
    assert!(rows.len() > 2);
    for r in &rows {
        assert!((r[1] - r[0]).abs() < 1e-12 && r[2] == 0.0 && r[3] == 0.0 && r[4] == 0.0);
    }
    assert!((rows.last().unwrap()[0] - 2.0).abs() < 1e-12);
    for w in rows.windows(2) {
        assert!(w[1][0] > w[0][0]);
    }
}

#[test]
fn trace_q0_stays_on_the_unit_sphere() {
    let q0 = hmod_core::catalog::Q0;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let start = format!("{h},{h},0");
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("arc.csv");
    let out = hmod(&["trace", "--q", q0, "--start", &start, "--max-length", "1.5", "--out", file.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = parse_csv(&std::fs::read_to_string(&file).unwrap());
    for r in &rows {
        let zz = r[1] * r[1] + r[2] * r[2];
        assert!((r[3] * r[3] + zz * zz - 1.0).abs() < 1e-7);
        assert!(r[4].abs() < 1e-8);
    }
}

#[test]
fn trace_from_the_axis_fails_with_diagnostic() {
    let out = hmod(&["trace", "--q", hmod_core::catalog::Q0, "--start", "0,0,1"]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("LeftDomain") || err.contains("ZeroOfQ"), "{err}");
    assert_eq!(code(&hmod(&["trace", "--q", "1", "--start", "0,0"])), 2);
}

#[test]
fn annulus_builtins_pass_every_check() {
    for name in ["annulus-horizontal", "annulus-vertical"] {
        let out = hmod(&["run", name, "--no-convergence"]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
        let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert!(v["checks"].as_array().unwrap().len() >= 7);
    }
}
