use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn escape(args: &[&str], config_file: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escape"))
        .args(args)
        .arg("--config")
        .arg(config_file)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn column(csv_text: &str, name: &str) -> Vec<String> {
    let mut lines = csv_text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn cyclic_route_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = escape(&["validate"], &config("cyclic.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("cyclic routing"), "{stderr}");
    assert!(stderr.contains("`route`"), "{stderr}");
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("competing_symmetric.json")).unwrap().replace("[2.0, 2.0]", "[2.0, \"x\"]");
    let bad = dir.path().join("bad.json");
    fs::write(&bad, text).unwrap();
    let out = escape(&["solve-dpe"], &bad, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`mu[1]`"));

    let out = escape(&["validate"], &dir.path().join("missing.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn closed_form_reports_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = escape(&["closed-form", "--samples", "500"], &config("single_class.json"), dir.path());
    assert!(out.status.success());
    let table = fs::read_to_string(dir.path().join("closed_form.csv")).unwrap();
    let alpha: f64 = column(&table, "alpha")[0].parse().unwrap();
    // ln(3 + sqrt 7), from lambda t^2 - 6 t + 2 = 0.
    let t = alpha.exp();
    assert!((t + 2.0 / t - 6.0).abs() < 1e-12);
    assert!((alpha - 1.730903).abs() < 1e-6);
    let scan = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert_eq!(column(&scan, "passed"), vec!["true"]);
}

#[test]
fn closed_form_rejects_other_networks() {
    let dir = tempfile::tempdir().unwrap();
    let out = escape(&["closed-form"], &config("tandem.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn converge_table_has_decreasing_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = escape(&["converge", "--n", "8,16,32"], &config("competing_symmetric.json"), dir.path());
    assert!(out.status.success());
    let table = fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    let errors: Vec<f64> = column(&table, "error").iter().map(|e| e.parse().unwrap()).collect();
    assert_eq!(errors.len(), 3);
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn solve_dpe_matches_the_tiny_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = escape(&["solve-dpe", "--n", "1", "--tol", "1e-14"], &config("tiny_chain.json"), dir.path());
    assert!(out.status.success());
    let table = fs::read_to_string(dir.path().join("dpe_n1.csv")).unwrap();
    let w: Vec<f64> = column(&table, "W").iter().map(|e| e.parse().unwrap()).collect();
    assert!((w[0] - 0.2).abs() < 1e-12 && (w[1] - 0.4).abs() < 1e-12, "{w:?}");
    assert_eq!(column(&table, "served"), vec!["idle", "1"]);
}

#[test]
fn non_convergence_keeps_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = escape(&["solve-dpe", "--n", "4", "--max-iters", "2"], &config("tandem.json"), dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("dpe_n4.csv").exists());
}

#[test]
fn reruns_are_byte_identical_and_independent_of_workers() {
    let runs: Vec<(tempfile::TempDir, &str)> = vec![
        (tempfile::tempdir().unwrap(), "1"),
        (tempfile::tempdir().unwrap(), "1"),
        (tempfile::tempdir().unwrap(), "3"),
    ];
    for (dir, workers) in &runs {
        for cmd in [
            vec!["simulate", "--n", "2", "--trials", "2000", "--seed", "4"],
            vec!["ham-check", "--samples", "20", "--seed", "4"],
            vec!["sp-check", "--samples", "20", "--seed", "4"],
        ] {
            let mut args = cmd.clone();
            args.extend(["--workers", workers]);
            let out = escape(&args, &config("competing_symmetric.json"), dir.path());
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        }
    }
    for file in ["simulate.csv", "ham_check.csv", "sp_check.csv"] {
        let first = fs::read(runs[0].0.path().join(file)).unwrap();
        for (dir, _) in &runs[1..] {
            assert_eq!(first, fs::read(dir.path().join(file)).unwrap(), "{file}");
        }
    }
}

#[test]
fn stamp_adds_a_comment_line_only_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let out = escape(&["converge", "--n", "2,4", "--stamp"], &config("competing_symmetric.json"), dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    assert!(text.starts_with("# generated at"));
    assert_eq!(text.lines().nth(1), Some("n,points,error,iterations,converged"));
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = escape(&["converge", "--n", "2,4"], &config("competing_symmetric.json"), dir.path());
    assert!(out.status.success());
    let table = fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    for e in column(&table, "error") {
        let mantissa = e.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17, "{e}");
        let back: f64 = e.parse().unwrap();
        assert_eq!(format!("{back:.16e}"), e);
    }
}

#[test]
fn simulate_rejects_off_lattice_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = escape(&["simulate", "--n", "4", "--x0", "0.3,0"], &config("competing_symmetric.json"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`x0`"));
}
