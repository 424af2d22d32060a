use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shaping-filter"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn without_version(s: &str) -> String {
    s.lines().filter(|l| !l.starts_with("# version")).collect::<Vec<_>>().join("\n")
}

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

#[test]
fn realization_of_second_order_example() {
    let v = json(&["synthesize", "--tf", r#"{"num": [1, 2], "den": [1, 3, 4]}"#]);
    let b = floats(&v["realization"]["b"]);
    assert!((b[0] - 0.5).abs() < 1e-15 && (b[1] + 0.125).abs() < 1e-15, "{b:?}");
    let interp = floats(&v["interpolation_b"]);
    assert!((interp[0] - 0.5).abs() < 1e-12 && (interp[1] + 0.125).abs() < 1e-12);
    assert_eq!(v["order"], 2);

    let v = json(&["synthesize", "--preset", "dryden2"]);
    let b = floats(&v["realization"]["b"]);
    assert!((b[0] - 0.125).abs() < 1e-15 && b[1].abs() < 1e-15, "{b:?}");
}

#[test]
fn partial_fractions_of_third_preset() {
    let v = json(&["synthesize", "--preset", "dryden3"]);
    let terms = v["partial_fractions"].as_array().unwrap();
    let coeffs: Vec<f64> = terms.iter().map(|t| t["coefficient"].as_f64().unwrap()).collect();
    for (c, e) in coeffs.iter().zip([-1.0, 1.5, -0.5]) {
        assert!((c - e).abs() < 1e-12, "{coeffs:?}");
    }
    assert_eq!(terms[2]["kind"], "second_order_repeated");
    assert!((v["kernel_norm_sq"].as_f64().unwrap() - 0.008292).abs() < 1e-6);
}

#[test]
fn validation_failures_exit_2() {
    let out = run(&["synthesize", "--tf", r#"{"num": [1, 2], "den": [1, 3]}"#]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NotProper"));

    let out = run(&["synthesize", "--preset", "dryden9"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--preset", "osc", "--grid", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["error-table", "--preset", "osc", "--L", "8,4"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["synthesize"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_3() {
    // θ = T/π with zero damping resonates with the first basis function
    let den = format!(r#"{{"num": [1], "den": [1, 0, {}]}}"#, (5.0 / std::f64::consts::PI).powi(2));
    let out = run(&["operator", "--operator", "exact", "--tf", &den, "--L", "4"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ResonantParameters"));
}

#[test]
fn spectral_simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        stdout(&["simulate", "--preset", "dryden1", "--method", "spectral", "--L", "256", "--seed", "1", "--out", p.to_str().unwrap()]);
    }
    let (x, y) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    let rows: Vec<_> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "t,x");
    assert_eq!(rows.len(), 1001);
    assert!(text.contains("# seed: 1"));
    assert!(text.contains("# tf: dryden1"));

    let other = stdout(&["simulate", "--preset", "dryden1", "--seed", "2"]);
    assert_ne!(other, text);
}

#[test]
fn every_method_and_layout_runs() {
    for method in ["spectral", "sde", "ito"] {
        let text = stdout(&["simulate", "--preset", "osc", "--method", method, "--grid", "11", "--steps", "100", "--L", "32", "--n", "3"]);
        assert!(text.lines().any(|l| l == "t,x_1,x_2,x_3"), "{method}");
        let stats = stdout(&["simulate", "--preset", "osc", "--method", method, "--grid", "11", "--steps", "100", "--L", "32", "--n", "20", "--stats"]);
        assert!(stats.lines().any(|l| l == "t,mean,var,stderr"), "{method}");
    }
    let out = run(&["simulate", "--preset", "osc", "--method", "sde", "--grid", "11", "--steps", "105"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unstable_filter_is_flagged() {
    let text = stdout(&["simulate", "--tf", r#"{"num": [1], "den": [-1, 2]}"#, "--method", "sde", "--grid", "51"]);
    assert!(text.contains("# warning: unstable transfer function"));
}

#[test]
fn derivative_dump() {
    let text = stdout(&["operator", "--operator", "P", "--T", "5", "--L", "4"]);
    assert!(text.lines().any(|l| l == "0,0,0.2"));
    assert_eq!(without_version(&text), without_version(&golden("derivative_L4.csv")));
}

#[test]
fn whitening_dump_of_first_preset() {
    // (γP̃ + Ẽ)/α with α = 1, γ = 3
    let w = json(&["operator", "--operator", "whiten", "--preset", "dryden1", "--L", "6", "--format", "json"]);
    let p = json(&["operator", "--operator", "P", "--L", "6", "--format", "json"]);
    for i in 0..6 {
        for j in 0..6 {
            let expect = 3.0 * p["matrix"][i][j].as_f64().unwrap() + if i == j { 1.0 } else { 0.0 };
            assert!((w["matrix"][i][j].as_f64().unwrap() - expect).abs() < 1e-12);
        }
    }
    assert_eq!(w["provenance"], "rational_in_P");
    assert_eq!(w["L"], 6);
}

#[test]
fn operator_difference_is_epsilon2() {
    let exact = json(&["operator", "--operator", "exact", "--preset", "dryden1", "--L", "8", "--format", "json"]);
    let rational = json(&["operator", "--operator", "rational", "--preset", "dryden1", "--L", "8", "--format", "json"]);
    let mut d2 = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            let d = exact["matrix"][i][j].as_f64().unwrap() - rational["matrix"][i][j].as_f64().unwrap();
            d2 += d * d;
        }
    }
    let table = json(&["error-table", "--preset", "dryden1", "--L", "8", "--format", "json"]);
    let eps2 = table["reports"][0]["epsilon2"].as_f64().unwrap();
    assert!((d2 - eps2).abs() < 1e-14, "{d2} vs {eps2}");
}

#[test]
fn error_tables() {
    let one = stdout(&["error-table", "--preset", "dryden1", "--L", "4"]);
    let rows: Vec<_> = one.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "L,epsilon,epsilon1,epsilon2");
    assert_eq!(rows.len(), 2);
    let cells: Vec<f64> = rows[1].split(',').map(|c| c.parse().unwrap()).collect();
    assert!((cells[1] - 0.125603).abs() < 5e-7 && (cells[2] - 0.091720).abs() < 5e-7);

    assert_eq!(stdout(&["error-table", "--preset", "osc", "--format", "markdown"]), golden("osc_table.md"));
    assert_eq!(stdout(&["error-table", "--preset", "dryden3", "--format", "markdown"]), golden("dryden3_table.md"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"preset": "dryden2", "L": [4, 8, 16], "T": 5.0}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let all = stdout(&["error-table", "--config", c]);
    assert_eq!(all.lines().filter(|l| !l.starts_with('#')).count(), 4);
    let one = stdout(&["error-table", "--config", c, "--L", "4"]);
    assert_eq!(one.lines().filter(|l| !l.starts_with('#')).count(), 2);
    let other = stdout(&["error-table", "--config", c, "--preset", "dryden1", "--L", "4"]);
    assert!(other.contains("0.12560"));

    fs::write(&cfg, r#"{"preset": "dryden2", "bogus": 1}"#).unwrap();
    assert_eq!(run(&["error-table", "--config", c]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_1() {
    let out = run(&["operator", "--operator", "P", "--L", "4", "--out", "/nonexistent-dir/p.csv"]);
    assert_eq!(out.status.code(), Some(1));
}
