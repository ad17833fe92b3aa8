use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn plap(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

#[test]
fn solve_affine_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(&["solve", "--boundary", "affine:1,-0.5,0.2", "--p", "3", "--h", "0.1"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(dir.path(), "solve_report.json");
    for key in ["p", "eps_stages", "energy", "residual", "iterations", "converged", "config_hash"] {
        assert!(rep.get(key).is_some(), "missing {key}");
    }
    assert_eq!(rep["converged"], Value::Bool(true));
    assert_eq!(rep["p"], 3.0);
    let field = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert!(field.starts_with("value\n"));
    let mesh = std::fs::read_to_string(dir.path().join("mesh.txt")).unwrap();
    assert!(mesh.lines().any(|l| l.starts_with("t ")));
}

#[test]
fn doubling_for_quadratic_harmonic() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(
        &["doubling", "--boundary", "harmpoly:2", "--p", "2", "--window", "0.1,0.8"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(dir.path(), "doubling_report.json");
    for key in ["p", "M", "eps0", "r0", "r_star", "max_ratio", "pass", "config_hash"] {
        assert!(rep.get(key).is_some(), "missing {key}");
    }
    assert_eq!(rep["pass"], Value::Bool(true));
    let m = rep["M"].as_f64().unwrap();
    assert!((m - 2.0).abs() < 0.1, "M = {m}");
    let eps0 = rep["eps0"].as_f64().unwrap();
    assert!((eps0 * 8.0 * m - 1.0).abs() < 1e-14);
    assert!(dir.path().join("profile.csv").exists() && dir.path().join("profile.svg").exists());
}

#[test]
fn inverted_window_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(&["frequency", "--window", "0.8,0.1"], dir.path());
    assert_eq!(code(&out), 2);
    let out = plap(&["frequency", "--window", "0.5,0.5"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let out = plap(&["solve", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(code(&out), 2);
    let out = plap(&["solve", "--config", "/nonexistent/x.cfg"], &dir.path().join("o"));
    assert_eq!(code(&out), 2);
    let out = plap(&["solve", "--p", "abc"], &dir.path().join("o"));
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# quick run\nh = 0.1\np = 4   # overridden below\nboundary = affine:0,1\n").unwrap();
    let out = plap(&["solve", "--config", cfg.to_str().unwrap(), "--p", "1.5"], &dir.path().join("o"));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&dir.path().join("o"), "solve_report.json")["p"], 1.5);
}

#[test]
fn reruns_reproduce_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["frequency", "--boundary", "harmpoly:3", "--h", "0.05", "--seed", "7"];
    assert_eq!(code(&plap(&args, &dir.path().join("a"))), 0);
    assert_eq!(code(&plap(&args, &dir.path().join("b"))), 0);
    let read = |d: &str, f: &str| std::fs::read(dir.path().join(d).join(f)).unwrap();
    assert_eq!(read("a", "profile.csv"), read("b", "profile.csv"));
    assert_eq!(read("a", "field.csv"), read("b", "field.csv"));
    let ha = report(&dir.path().join("a"), "frequency_report.json")["config_hash"].clone();
    let hb = report(&dir.path().join("b"), "frequency_report.json")["config_hash"].clone();
    assert_eq!(ha, hb);
    let other = plap(&["frequency", "--boundary", "harmpoly:3", "--h", "0.05", "--seed", "8"], &dir.path().join("c"));
    assert_eq!(code(&other), 0);
    assert_ne!(report(&dir.path().join("c"), "frequency_report.json")["config_hash"], ha);
}

#[test]
fn verify_radial_solution_on_annulus() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(
        &["verify", "--domain", "annulus", "--r-inner", "0.3", "--boundary", "radial:3", "--p", "3", "--h", "0.05", "--window", "0.05,0.3"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(dir.path(), "verify_report.json");
    assert_eq!(rep["grad_estimate_holds"], Value::Bool(true));
    assert_eq!(rep["i_prime_bound_holds"], Value::Bool(true));
    assert_eq!(rep["maximum_principle"], Value::Bool(true));
    assert!(rep["max_nodal_error"].as_f64().unwrap() < 1e-2);
}

#[test]
fn linearize_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(&["linearize", "--alpha", "-1,2", "--p", "3", "--field", "radial:3"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(dir.path(), "linearize_report.json");
    assert_eq!(rep["lambda_min"], 5.0);
    assert_eq!(rep["lambda_max"], 10.0);
    assert!(rep["max_residual"].as_f64().unwrap() <= 1e-9);
    assert!(rep["flagged_points"].as_array().unwrap().is_empty());
    // Re z^2 is not 3-harmonic
    let out = plap(&["linearize", "--p", "3", "--field", "harmpoly:2"], dir.path());
    assert_eq!(code(&out), 2);
    let out = plap(&["linearize", "--alpha", "0,0"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn probes_on_harmonic_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(&["probes", "--boundary", "harmpoly:2", "--h", "0.05", "--grid", "16"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(dir.path(), "probes_report.json");
    assert_eq!(rep["convexity_holds"], Value::Bool(true));
    assert_eq!(rep["vanishing_radius"], 0.0);
    assert_eq!(rep["radii"].as_array().unwrap().len(), 16);
}

#[test]
fn non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(&["solve", "--boundary", "harmpoly:2", "--p", "4", "--h", "0.1", "--max-outer", "1", "--max-inner", "1"], dir.path());
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(dir.path(), "solve_report.json")["converged"], Value::Bool(false));
}

#[test]
fn vanishing_window_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(&["doubling", "--boundary", "const:0", "--h", "0.1"], dir.path());
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unwritable_output_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let out = plap(&["solve", "--h", "0.1"], &file.join("sub"));
    assert_eq!(code(&out), 5);
}

#[test]
fn catalog_lists_members() {
    let out = Command::new(env!("CARGO_BIN_EXE_plap")).arg("catalog").output().unwrap();
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let ids: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert!(ids.iter().any(|i| i.starts_with("harmpoly")) && ids.iter().any(|i| i.starts_with("radial")));
}
