use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn reachcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reachcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn write(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn gaussian(n: usize) -> Value {
    let cov: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    json!({"kind": "gaussian", "cov": cov})
}

fn identity(n: usize) -> Value {
    gaussian(n)["cov"].clone()
}

fn uniform() -> Value {
    json!({"kind": "uniform-interval-product", "half_widths": [1.0]})
}

fn ball(n: usize, radius: f64) -> Value {
    json!({"center": vec![0.0; n], "radius": radius})
}

/// The nine regression systems with their expected verdicts.
fn regression_matrix() -> Vec<(&'static str, Value, &'static str)> {
    let (c, s) = (std::f64::consts::FRAC_PI_4.cos(), std::f64::consts::FRAC_PI_4.sin());
    vec![
        (
            "stable",
            json!({"A": [[0.5, 0.3, 0.0], [-0.2, 0.4, 0.1], [0.0, 0.3, -0.6]], "B": identity(3),
                   "noise": gaussian(3), "target": ball(3, 1.0)}),
            "ReachableStable",
        ),
        (
            "doubling",
            json!({"A": [[2.0]], "B": [[1.0]], "noise": uniform(), "target": ball(1, 2.0)}),
            "NotReachableUnstable",
        ),
        (
            "shear",
            json!({"A": [[1.0, 1.0], [0.0, 1.0]], "B": identity(2), "noise": gaussian(2), "target": ball(2, 1.0)}),
            "NotReachableJordan",
        ),
        (
            "identity3",
            json!({"A": identity(3), "B": identity(3), "noise": gaussian(3), "target": ball(3, 1.0)}),
            "NotReachableDimension",
        ),
        (
            "walk",
            json!({"A": [[1.0]], "B": [[1.0]], "noise": uniform(), "target": ball(1, 2.0)}),
            "ReachableCritical",
        ),
        (
            "rotation",
            json!({"A": [[c, -s], [s, c]], "B": identity(2), "noise": gaussian(2), "target": ball(2, 3.0)}),
            "ReachableCritical",
        ),
        (
            "mixed",
            json!({"A": [[1.0, 0.0], [0.0, 0.5]], "B": identity(2), "noise": gaussian(2), "target": ball(2, 1.0)}),
            "ReachableCritical",
        ),
        (
            "thin_b",
            json!({"A": identity(2), "B": [[1.0], [1.0]], "noise": gaussian(1), "target": ball(2, 1.0)}),
            "InconclusiveAssumption",
        ),
        (
            "frozen_coordinate",
            json!({"A": identity(3), "B": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]],
                   "noise": gaussian(3), "target": ball(3, 1.0)}),
            "InconclusiveAssumption",
        ),
    ]
}

fn system_file(dir: &TempDir, name: &str) -> PathBuf {
    let (_, value, _) = regression_matrix().into_iter().find(|(n, _, _)| *n == name).unwrap();
    write(dir.path(), &format!("{name}.json"), &value)
}

#[test]
fn classify_random_walk() {
    let dir = TempDir::new().unwrap();
    let sys = system_file(&dir, "walk");
    let out = reachcert(&["classify", "--system", sys.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = stdout_json(&out);
    assert_eq!(report["verdict"]["outcome"], "ReachableCritical");
    assert_eq!(report["pass"], true);
    assert_eq!(report["input"]["system_sha256"].as_str().unwrap().len(), 64);
    assert!(report["verdict"]["branch_trace"].as_array().unwrap().len() >= 3);
}

#[test]
fn certify_unstable_scalar_is_refused() {
    let dir = TempDir::new().unwrap();
    let sys = system_file(&dir, "doubling");
    let out = reachcert(&["certify", "--system", sys.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no certificate exists for NotReachableUnstable"), "{}", stderr(&out));
}

#[test]
fn verify_rejects_indefinite_certificate() {
    let dir = TempDir::new().unwrap();
    let sys = system_file(&dir, "walk");
    let cert = write(
        dir.path(),
        "cert.json",
        &json!({"kind": "quadratic", "q": [[-1.0]], "alpha": 1.0, "compact_radius_sq": 1.0,
                "variant_b": 1.0, "r0": 0.5, "delta": 0.5, "noise_set_bound": 1.0}),
    );
    let out = reachcert(&["verify", "--system", sys.to_str().unwrap(), "--certificate", cert.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("positive definite"), "{}", stderr(&out));
}

#[test]
fn certificate_round_trip() {
    for name in ["stable", "walk", "rotation"] {
        let dir = TempDir::new().unwrap();
        let sys = system_file(&dir, name);
        let out_dir = dir.path().join("certify");
        let out = reachcert(&["certify", "--system", sys.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
        let cert_path = out_dir.join("certificate.json");
        let before = fs::read(&cert_path).unwrap();

        let out = reachcert(&[
            "verify",
            "--system",
            sys.to_str().unwrap(),
            "--certificate",
            cert_path.to_str().unwrap(),
            "--samples",
            "2000",
        ]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
        assert_eq!(fs::read(&cert_path).unwrap(), before);
        let report = stdout_json(&out);
        let certified: Value = serde_json::from_slice(&before).unwrap();
        assert_eq!(report["certificate"], certified, "{name}");
        assert_eq!(report["verification"]["drift"]["pass"], true);
        assert_eq!(report["verification"]["variant"]["pass"], true);
    }
}

#[test]
fn verify_fails_on_foreign_system() {
    let dir = TempDir::new().unwrap();
    let stable = write(
        dir.path(),
        "stable1.json",
        &json!({"A": [[0.5]], "B": [[1.0]], "noise": uniform(), "target": ball(1, 2.0)}),
    );
    let out_dir = dir.path().join("c");
    let out = reachcert(&["certify", "--system", stable.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doubling = system_file(&dir, "doubling");
    let out = reachcert(&[
        "verify",
        "--system",
        doubling.to_str().unwrap(),
        "--certificate",
        out_dir.join("certificate.json").to_str().unwrap(),
        "--samples",
        "1000",
    ]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["verification"]["drift"]["pass"], false);
}

#[test]
fn exit_codes_on_regression_matrix() {
    let dir = TempDir::new().unwrap();
    for (name, value, expected) in regression_matrix() {
        let sys = write(dir.path(), &format!("{name}.json"), &value);
        let out = reachcert(&["classify", "--system", sys.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
        assert_eq!(stdout_json(&out)["verdict"]["outcome"], expected, "{name}");

        let out = reachcert(&["certify", "--system", sys.to_str().unwrap()]);
        if expected.starts_with("Reachable") {
            assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
            assert!(stdout_json(&out)["certificate"]["kind"].is_string());
        } else {
            assert_eq!(code(&out), 2, "{name}");
            assert!(stderr(&out).contains(&format!("no certificate exists for {expected}")), "{name}");
        }
    }
}

#[test]
fn reports_are_byte_identical_for_equal_seeds() {
    let dir = TempDir::new().unwrap();
    let sys = system_file(&dir, "rotation");
    let run = |out: &str, threads: &str| {
        let out_dir = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_reachcert"))
            .env("REACHCERT_THREADS", threads)
            .args([
                "simulate",
                "--system",
                sys.to_str().unwrap(),
                "--x0",
                "5,0",
                "--trajectories",
                "50",
                "--horizon",
                "2000",
                "--decay",
                "--seed",
                "11",
                "--out",
                out_dir.to_str().unwrap(),
                "--csv",
            ])
            .output()
            .unwrap();
        assert_eq!(code(&status), 0, "{}", stderr(&status));
        out_dir
    };
    let a = run("a", "1");
    let b = run("b", "2");
    for file in ["report.json", "trajectories.csv", "occupancy.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let timings: Value = serde_json::from_slice(&fs::read(a.join("timings.json")).unwrap()).unwrap();
    assert!(timings["total_seconds"].as_f64().unwrap() >= 0.0);
    let report: Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seeds"], json!({"seed": 11, "trajectories": 50, "horizon": 2000}));
}

#[test]
fn simulate_csv_layout() {
    let dir = TempDir::new().unwrap();
    let sys = system_file(&dir, "rotation");
    let out_dir = dir.path().join("sim");
    let out = reachcert(&[
        "simulate",
        "--system",
        sys.to_str().unwrap(),
        "--x0",
        "-1,2",
        "--trajectories",
        "3",
        "--horizon",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
        "--csv",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(out_dir.join("trajectories.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trajectory_id,k,x1,x2");
    assert_eq!(lines[1], "0,0,-1,2");
    assert_eq!(lines.len(), 1 + 3 * 5);
}

#[test]
fn polynomial_systems_simulate_but_do_not_classify() {
    let dir = TempDir::new().unwrap();
    let sys = write(
        dir.path(),
        "ex1.json",
        &json!({"transition": ["0.5*x1*(1 + x2 + w1)", "0.5*x2"], "noise": uniform(),
                "target": {"center": [0.5, 0.5], "radius": 0.5, "norm": "max"}}),
    );
    let out = reachcert(&["classify", "--system", sys.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let out = reachcert(&[
        "simulate", "--system", sys.to_str().unwrap(), "--x0", "0.5,0.5", "--trajectories", "5", "--horizon", "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["ensemble"]["hits"], 5);
}

#[test]
fn target_flags_override_the_file() {
    let dir = TempDir::new().unwrap();
    let sys = system_file(&dir, "walk");
    let out = reachcert(&["classify", "--system", sys.to_str().unwrap(), "--target-radius", "5", "--target-center=-1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = stdout_json(&out);
    assert_eq!(report["target"]["radius"], 5.0);
    assert_eq!(report["target"]["center"], json!([-1.0]));

    let out = reachcert(&["classify", "--system", sys.to_str().unwrap(), "--target-center", "3", "--target-radius", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let sys = system_file(&dir, "walk");
    let s = sys.to_str().unwrap();
    for args in [
        vec!["classify"],
        vec!["classify", "--system", "/nonexistent/system.json"],
        vec!["classify", "--system", s, "--csv"],
        vec!["classify", "--system", s, "--unit-tol", "-1"],
        vec!["simulate", "--system", s, "--trajectories", "0"],
        vec!["simulate", "--system", s, "--x0", "1,2"],
        vec!["frobnicate"],
    ] {
        assert_eq!(code(&reachcert(&args)), 2, "{args:?}");
    }
    let broken = dir.path().join("broken.json");
    fs::write(&broken, r#"{"A": [[1.0]], "B": [[1.0]], "noise": {"kind": "cauchy"}}"#).unwrap();
    let out = reachcert(&["classify", "--system", broken.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("noise.kind"), "{}", stderr(&out));

    let out = Command::new(env!("CARGO_BIN_EXE_reachcert"))
        .env("REACHCERT_THREADS", "many")
        .args(["classify", "--system", s])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn repro_example2() {
    let out = reachcert(&["repro", "example2", "--samples", "20000", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = stdout_json(&out);
    assert_eq!(report["repro"]["quadratic_always_increases"], true);
    assert_eq!(report["seeds"]["samples"], 20000);
}

#[test]
fn repro_example1_bounds_writes_csv() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("r");
    let out = reachcert(&["repro", "example1-bounds", "--samples", "2000", "--out", out_dir.to_str().unwrap(), "--csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(out_dir.join("example1_bounds.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(text.starts_with("i,u,sequences,lower,upper"));
}
