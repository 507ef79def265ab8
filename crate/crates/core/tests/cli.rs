mod common;

use std::fs;

use common::fixture_dir;
use serde_json::Value;
use wattbound::cli::{main_with, EXIT_ANALYSIS, EXIT_ANNOTATION, EXIT_OK};
use wattbound::regression::instantiate;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["wattbound".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn fx(name: &str) -> String {
    fixture_dir().join(name).to_string_lossy().into_owned()
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = run(args);
    assert_eq!(code, EXIT_OK, "{err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn missing_loop_bound_is_an_annotation_error() {
    let (code, _, err) = run(&["analyze", &fx("sum8.mir"), "--model", &fx("default.em")]);
    assert_eq!(code, EXIT_ANNOTATION);
    assert!(err.contains("loop bound"), "{err}");
}

#[test]
fn unbalanced_pipeline_is_an_analysis_error() {
    let (code, _, err) = run(&["analyze", &fx("pipeline_unbalanced.isa"), "--ann", &fx("pipeline_unbalanced.ann")]);
    assert_eq!(code, EXIT_ANALYSIS);
    assert!(err.contains("unbalanced"), "{err}");
}

#[test]
fn missing_file_is_an_analysis_error() {
    let (code, _, _) = run(&["analyze", &fx("nope.mir")]);
    assert_eq!(code, EXIT_ANALYSIS);
}

#[test]
fn single_path_program_has_equal_bounds() {
    let v = json(&["analyze", &fx("straight.mir"), "--model", &fx("default.em"), "--sense", "both"]);
    assert_eq!(v["upper"]["bound_exact_j"], v["lower"]["bound_exact_j"]);
    assert_eq!(v["upper_gap_pct"], 0.0);
}

#[test]
fn sense_selects_keys() {
    let v = json(&["analyze", &fx("select.mir"), "--sense", "upper"]);
    assert!(v.get("upper").is_some());
    assert!(v.get("lower").is_none());
}

#[test]
fn map_reports_conservation() {
    let dir = tempfile::tempdir().unwrap();
    let isa = dir.path().join("fir.isa");
    let v = json(&["map", &fx("fir.mir"), "--emit-isa", isa.to_str().unwrap()]);
    assert_eq!(v["conservation"], "OK");
    let text = fs::read_to_string(&isa).unwrap();
    assert!(text.contains("func main"), "{text}");
}

#[test]
fn simulate_runs_without_inputs() {
    let v = json(&["simulate", &fx("straight.mir")]);
    assert!(v["energy_nj"].as_f64().unwrap() > 0.0, "{v}");
}

#[test]
fn simulated_energy_sits_inside_compare_bounds() {
    let dir = tempfile::tempdir().unwrap();
    for n in ["radix4div.in", "radix4div.2.in", "radix4div.3.in", "radix4div.4.in"] {
        fs::copy(fx(n), dir.path().join(n)).unwrap();
    }
    let v = json(&["compare", &fx("radix4div.mir"), "--ann", &fx("radix4div.ann"), "--inputs", dir.path().to_str().unwrap()]);
    assert_eq!(v["all_within"], true, "{v}");
}

#[test]
fn fit_reads_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pts.csv");
    fs::write(&p, "x,e\n0,94.2\n1,113.2\n2,132.2\n").unwrap();
    let v = json(&["fit", "--degree", "1", "--points", p.to_str().unwrap()]);
    assert_eq!(v["equation"], "f(x) = 19.00x + 94.20");
}

#[test]
fn sweep_upper_bounds_increase() {
    let v = json(&[
        "sweep",
        &fx("templates/matmul.mir"),
        "--ann",
        &fx("templates/matmul.ann"),
        "--from",
        "1",
        "--to",
        "5",
    ]);
    let ups: Vec<f64> = v["points"].as_array().unwrap().iter().map(|p| p["upper_nj"].as_f64().unwrap()).collect();
    assert_eq!(ups.len(), 5);
    assert!(ups.windows(2).all(|w| w[0] < w[1]), "{ups:?}");
}

#[test]
fn matmul_fixture_is_the_template_at_four() {
    let dir = fixture_dir();
    for ext in ["mir", "ann"] {
        let t = fs::read_to_string(dir.join(format!("templates/matmul.{ext}"))).unwrap();
        let f = fs::read_to_string(dir.join(format!("matmul.{ext}"))).unwrap();
        assert_eq!(instantiate(&t, 4), f, "matmul.{ext}");
    }
}
