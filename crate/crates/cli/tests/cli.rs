use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn psphere(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psphere")).args(args).env("NO_COLOR", "1").output().expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let out = psphere(args);
    let code = out.status.code().expect("exited");
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    });
    (code, v)
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn assert_schema(doc: &Value, command: &str) {
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["command"], command);
    assert!(doc["spec"].is_object());
    assert!(doc["diagnostics"].is_object());
    let results = doc["results"].as_array().unwrap();
    assert!(!results.is_empty());
    for r in results {
        for key in ["label", "solution", "objective", "grad_norm", "iterations", "converged", "diagnostics"] {
            assert!(r.get(key).is_some(), "missing {key} in {r}");
        }
    }
}

#[test]
fn nnpca_diagonal_fixture_finds_dominant_axis() {
    let (code, doc) = json(&["nnpca", "--fixture", "diag21"]);
    assert_eq!(code, 0);
    assert_schema(&doc, "nnpca");
    let d = &doc["results"][0]["diagnostics"];
    let v = floats(&d["v"]);
    assert!((v[0] - 1.0).abs() <= 1e-8 && v[1].abs() <= 1e-6, "{v:?}");
    assert!((d["lifted_objective"].as_f64().unwrap() + 2.0).abs() <= 1e-8);
    assert_eq!(d["kkt"]["passed"], true);
}

#[test]
fn nnpca_output_is_reproducible_and_lift_is_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = psphere(&["nnpca", "--n", "10", "--seed", "7", "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let doc: Value = serde_json::from_slice(&bytes).unwrap();
    let v = floats(&doc["results"][0]["diagnostics"]["v"]);
    assert!(v.iter().all(|&x| x >= -1e-9));
    assert!((v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() <= 1e-8);
}

#[test]
fn nnpca_exit_code_reports_non_convergence() {
    assert_eq!(psphere(&["nnpca", "--n", "10", "--max-iters", "1"]).status.code(), Some(2));
}

#[test]
fn invalid_input_exits_one() {
    for args in [
        vec!["nnpca", "--n", "1"],
        vec!["nnpca", "--no-such-flag"],
        vec!["nnpca", "--tol", "-1"],
        vec!["lasso", "--eps", "0"],
        vec!["lasso", "--m", "5", "--n", "13"],
        vec!["boxqp", "--p", "0.5"],
        vec!["geomcheck", "--n", "1"],
        vec!["nnpca", "--matrix", "/nonexistent.csv"],
    ] {
        let out = psphere(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn nnpca_reads_csv_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    std::fs::write(&path, "# 3 3\n3,0,0\n0,1,0\n0,0,2\n").unwrap();
    let (code, doc) = json(&["nnpca", "--matrix", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v = floats(&doc["results"][0]["diagnostics"]["v"]);
    assert!((v[0] - 1.0).abs() <= 1e-8, "{v:?}");
    std::fs::write(&path, "1,2\n2,1\n").unwrap();
    assert_eq!(psphere(&["nnpca", "--matrix", path.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn lasso_reports_per_radius_and_baseline() {
    let (code, doc) = json(&["lasso", "--C", "100", "--max-iters", "2000"]);
    assert_eq!(code, 0);
    assert_schema(&doc, "lasso");
    assert_eq!(doc["spec"]["solver"]["retraction"], "projective");
    assert_eq!(doc["spec"]["solver"]["method"], "gd");
    let r = &doc["results"][0];
    let w = floats(&r["solution"]);
    assert_eq!(w.len(), 13);
    assert!((w.iter().map(|x| x.abs()).sum::<f64>() - 100.0).abs() <= 1e-3);
    assert_eq!(r["diagnostics"]["support_size"], 13);
    assert_eq!(floats(&doc["diagnostics"]["unregularized"]["w"]).len(), 13);
}

#[test]
fn lasso_zero_response_scales_quadratically() {
    let obj = |c: &str| {
        let (code, doc) = json(&["lasso", "--zero-response", "--C", c, "--method", "cg", "--retraction", "normalize"]);
        assert_eq!(code, 0);
        doc["results"][0]["objective"].as_f64().unwrap()
    };
    let a = obj("0.001");
    let b = obj("0.002");
    assert!(a > 0.0);
    assert!((b / a - 4.0).abs() <= 1e-3, "{a} {b}");
}

#[test]
fn lasso_skips_singular_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    let y = dir.path().join("y.csv");
    let rows: Vec<String> = (0..8).map(|i| format!("{i},{i},1,{}", i * i % 5)).collect();
    std::fs::write(&x, rows.join("\n")).unwrap();
    std::fs::write(&y, (0..8).map(|i| format!("{}", i % 3)).collect::<Vec<_>>().join("\n")).unwrap();
    let (code, doc) = json(&["lasso", "--design", x.to_str().unwrap(), "--response", y.to_str().unwrap(), "--C", "2"]);
    assert_eq!(code, 0);
    assert!(doc["diagnostics"]["unregularized"].is_null());
    assert!(doc["diagnostics"]["unregularized_skipped"].is_string());
}

#[test]
fn boxqp_distances_shrink_with_p() {
    let (code, doc) = json(&["boxqp"]);
    assert_eq!(code, 0);
    assert_schema(&doc, "boxqp");
    let d: Vec<f64> =
        doc["results"].as_array().unwrap().iter().map(|r| r["diagnostics"]["distance_to_reference"].as_f64().unwrap()).collect();
    assert_eq!(d.len(), 4);
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn boxqp_fixtures() {
    let (code, doc) = json(&["boxqp", "--fixture", "clamp", "--p", "5000"]);
    assert_eq!(code, 0);
    let w = floats(&doc["results"][0]["solution"]);
    assert!((w[0] - 1.0).abs() <= 1e-3 && w[1].abs() <= 1e-3, "{w:?}");
    assert_eq!(psphere(&["boxqp", "--fixture", "feasible", "--retries", "0"]).status.code(), Some(3));
}

#[test]
fn csv_output_has_one_row_per_leaf() {
    let out = psphere(&["nnpca", "--fixture", "diag21", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path,value"));
    assert!(text.lines().any(|l| l == "schema,1"));
    let v0 = text.lines().find_map(|l| l.strip_prefix("results.0.diagnostics.v.0,")).unwrap();
    assert!((v0.parse::<f64>().unwrap() - 1.0).abs() <= 1e-8);
}

#[test]
fn geomcheck_defaults_pass() {
    let out = psphere(&["geomcheck"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains('\x1b'));
    assert!(text.contains("all rows pass"));
}

#[test]
fn geomcheck_closed_form_cell_is_at_rounding_level() {
    let (code, doc) = json(&["geomcheck", "--p", "2", "--n", "2", "--format", "json"]);
    assert_eq!(code, 0);
    for row in doc["report"]["rows"].as_array().unwrap() {
        assert!(row["worst"].as_f64().unwrap() <= 1e-10, "{row}");
    }
}

#[test]
fn geomcheck_extreme_exponents_stay_finite() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = psphere(&[
        "geomcheck", "--p", "1.000001,50000", "--n", "2,5,50", "--trials", "20", "--format", "json", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let doc: Value = serde_json::from_slice(&std::fs::read(Path::new(&path)).unwrap()).unwrap();
    for row in doc["report"]["rows"].as_array().unwrap() {
        assert!(row["worst"].as_f64().is_some_and(f64::is_finite), "{row}");
    }
}
