use std::process::{Command, Output};

use ewweb::pdesolve::{manufactured, manufactured_config};
use serde_json::Value;

fn ewweb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ewweb")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn without_timestamp(out: &Output) -> String {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()
}

#[test]
fn verify_ew_on_a_solution() {
    let out = ewweb(&["verify-ew", "--w", "y*exp(x)+z*exp(2*x)", "--a", "1", "--b", "2", "--points", "20", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "verify-ew");
    assert_eq!(r["seed"], 7);
    assert_eq!(r["conventions_digest"], ewweb::conventions::digest());
    assert!(r["values"]["max_e_norm"].as_f64().unwrap() <= 1e-9);
    assert!(r["timestamp"].is_string());
}

#[test]
fn verify_jacobi_off_solution_fails() {
    let out = ewweb(&["verify-jacobi", "--w", "x*y+z", "--a", "1", "--b", "2", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["values"]["J_x_p0_p1"].as_f64().unwrap(), -2.0);
    assert_eq!(r["values"]["probe_point"], serde_json::json!([1.0, 1.0, 1.0]));
    assert_eq!(check(&r, "jacobiator")["pass"], false);

    let on = ewweb(&["verify-jacobi", "--w", "y*exp(x)+z*exp(2*x)", "--a", "1", "--b", "2", "--at", "0.1,0.5,0.5"]);
    assert_eq!(on.status.code(), Some(0));
}

#[test]
fn heisenberg_example() {
    let out = ewweb(&["heisenberg", "--eps", "1", "--a", "1", "--b", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["values"]["lambda4"].as_f64().unwrap(), -1.0);
    assert!(check(&r, "Hirota residual of w")["max_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn same_seed_same_report() {
    let args = ["lax-commutator", "--w", "x*y^2 + z*exp(x)", "--seed", "11", "--points", "5"];
    let (a, b) = (ewweb(&args), ewweb(&args));
    assert_eq!(a.status.code(), Some(1));
    assert_eq!(without_timestamp(&a), without_timestamp(&b));
    let other = ewweb(&["lax-commutator", "--w", "x*y^2 + z*exp(x)", "--seed", "12", "--points", "5"]);
    assert_ne!(without_timestamp(&a), without_timestamp(&other));
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let job = dir.path().join("job.json");
    std::fs::write(
        &job,
        r#"{"command": "hierarchy-check", "w": "x0*exp(k*x/1) + x1*exp(k*x/2) + x2*exp(k*x/3)",
            "a": [1, 2, 3], "params": {"k": 2}, "points": 10, "seed": 3}"#,
    )
    .unwrap();
    let from_file = ewweb(&["--config", job.to_str().unwrap()]);
    assert_eq!(from_file.status.code(), Some(0), "{}", String::from_utf8_lossy(&from_file.stderr));
    let flags = ewweb(&[
        "hierarchy-check",
        "--w",
        "x0*exp(k*x/1) + x1*exp(k*x/2) + x2*exp(k*x/3)",
        "--a",
        "1,2,3",
        "--param",
        "k=2",
        "--points",
        "10",
        "--seed",
        "3",
    ]);
    assert_eq!(without_timestamp(&from_file), without_timestamp(&flags));
    assert!(check(&report(&flags), "hierarchy_residual")["max_residual"].as_f64().unwrap() <= 1e-12);

    // flags after the config override it
    let seeded = ewweb(&["hierarchy-check", "--config", job.to_str().unwrap(), "--seed", "4"]);
    assert_eq!(report(&seeded)["seed"], 4);
}

#[test]
fn solver_config_and_grid_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solver.json");
    std::fs::write(&cfg, serde_json::to_string(&manufactured_config(32, 0.2, 20)).unwrap()).unwrap();
    let csv = dir.path().join("H.csv");
    let (exact, _) = manufactured();
    let out = ewweb(&[
        "solve-hypercr",
        "--config",
        cfg.to_str().unwrap(),
        "--exact",
        &exact.to_string(),
        "--refine",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["values"]["steps_taken"], 20);
    let order = r["values"]["observed_order"].as_f64().unwrap();
    assert!((order - 2.0).abs() <= 0.2, "{order}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("X,Y,T,value\n"));
    assert_eq!(text.lines().count(), 1 + 32 * 32 * 21);
}

#[test]
fn failing_recursion_exits_one() {
    let out = ewweb(&["twistor-recursion", "--h", "X*Y^2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(check(&report(&out), "consistency")["pass"], false);
    let ok = ewweb(&["twistor-recursion", "--param", "eps=1", "--order", "5"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(report(&ok)["values"]["coefficients"][3], "0.5*X^2");
}

#[test]
fn deformation_job() {
    let out = ewweb(&[
        "deform",
        "--f",
        "psi^2",
        "--eps",
        "0.1",
        "--closed-form",
        "(m0 + l*m1 + l^2*m2)/(1 - 0.1*(m0 + l*m1 + l^2*m2))",
        "--points",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let bad = ewweb(&["deform", "--f", "psi^3", "--eps", "0.1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn geometry_jobs_pass_on_a_solution() {
    for cmd in ["veronese-check", "jones-tod", "eform-check"] {
        let out = ewweb(&[cmd, "--w", "y*exp(x)+z*exp(2*x)", "--a", "1", "--b", "2", "--points", "5"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let off = ewweb(&["eform-check", "--w", "x*y+z", "--a", "1", "--b", "2", "--points", "5"]);
    assert_eq!(off.status.code(), Some(1));
}

#[test]
fn invalid_input_exits_two() {
    for args in [
        vec!["verify-ew", "--w", "x", "--a", "1", "--b", "2", "--bogus"],
        vec!["verify-ew", "--w", "q*x", "--a", "1", "--b", "2"],
        vec!["verify-ew", "--w", "x+", "--a", "1", "--b", "2"],
        vec!["verify-ew", "--w", "x+y+z", "--a", "1", "--b", "2", "--tol", "einstein_weyl=0"],
        vec!["verify-ew", "--w", "x+y+z", "--a", "1", "--b", "2", "--tol", "nonexistent=1"],
        vec!["heisenberg", "--eps", "1", "--a", "1", "--b", "1"],
        vec!["no-such-command"],
        vec!["--config", "/nonexistent/job.json"],
    ] {
        let out = ewweb(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn tolerance_override_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = ewweb(&[
        "lax-commutator",
        "--w",
        "x*y+z",
        "--tol",
        "frobenius=1e3",
        "--points",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(check(&r, "frobenius")["tolerance"].as_f64().unwrap(), 1e3);
}
