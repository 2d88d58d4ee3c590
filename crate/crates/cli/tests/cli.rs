//! End-to-end runs of the `lsys` binary: exit codes, diagnostics, determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn lsys(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsys")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn arg(path: &Path) -> &str {
    path.to_str().unwrap()
}

const DRIFT: &str = "\
[vars]
state = x, y

[system]
f = 1, y

[constraints]
phi = y - 2

[forces]
delta = x, 1

[constant drift]
h = y*exp(-x)

[sample]
x = -2, 2
y = 0.5, 3
";

#[test]
fn example1_analysis_at_a_point() {
    let out = lsys(&["analyze", "--scenario", "example1", "--at", "x=0.5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(&out);
    let point = &report["points"][0];
    assert_eq!(point["x"][1].as_f64(), Some(2.0));
    let c = &point["constrained"];
    assert_eq!(c["D"][0][0].as_f64(), Some(1.0));
    assert_eq!(c["u"][0].as_f64(), Some(-2.0));
    assert_eq!(c["field"][0].as_f64(), Some(0.0));
    assert_eq!(c["field"][1].as_f64(), Some(0.0));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    for path in [&first, &second] {
        let out = lsys(&["check-symmetry", "--scenario", "rosenberg", "--points", "30", "--out", arg(path)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());

    let csv = |name: &str| {
        let path = dir.path().join(name);
        let out = lsys(&[
            "simulate", "--scenario", "rosenberg", "--x0", "y=0.5,x'=1,y'=1", "--t1", "1", "--dt", "0.05", "--out",
            arg(&path),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read(path).unwrap()
    };
    assert_eq!(csv("a.csv"), csv("b.csv"));
}

#[test]
fn self_test_passes() {
    let out = lsys(&["--self-test"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json(&out)["passed"], Value::Bool(true));
}

#[test]
fn scenario_listing_and_source() {
    let out = lsys(&["scenario", "--list"]);
    assert_eq!(code(&out), 0);
    let listing = String::from_utf8(out.stdout).unwrap();
    for name in ["example1", "rosenberg", "relparticle-L1", "relparticle-L2"] {
        assert!(listing.contains(name), "{listing}");
    }
    let out = lsys(&["scenario", "rosenberg"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("[lagrangian]"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&lsys(&["bogus"])), 2);
    assert_eq!(code(&lsys(&[])), 2);

    let out = lsys(&["analyze", "--scenario", "nope"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nope"));

    let out = lsys(&["simulate", "--scenario", "rosenberg", "--x0", "x=0", "--t1", "1", "--dt", "-0.1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--dt"));

    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "drift.lss", DRIFT);
    assert_eq!(code(&lsys(&["analyze", "--scenario", "example1", "--spec", arg(&spec)])), 2);
    assert_eq!(code(&lsys(&["--tol-rank", "-1", "analyze", "--spec", arg(&spec)])), 2);
}

#[test]
fn load_errors_name_the_line_and_identifier() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "bad.lss", "[vars]\nstate = x, y\n\n[system]\nf = 1, w\n");
    let out = lsys(&["analyze", "--spec", arg(&spec)]);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("line 5") && msg.contains("`w`"), "{msg}");

    let both = "[vars]\nstate = x\n\n[system]\nf = 1\n\n[lagrangian]\nL = x\n";
    let out = lsys(&["analyze", "--spec", arg(&write(&dir, "both.lss", both))]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let cyclic = "[vars]\nstate = x\n\n[params]\na = b\nb = a\n\n[system]\nf = a\n";
    let out = lsys(&["analyze", "--spec", arg(&write(&dir, "cyclic.lss", cyclic))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("a -> b -> a") || stderr(&out).contains("b -> a -> b"), "{}", stderr(&out));
}

#[test]
fn evaluation_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "dom.lss", "[vars]\nstate = x, y\n\n[system]\nf = log(x), 1\n");
    let out = lsys(&["simulate", "--spec", arg(&spec), "--x0", "x=-1,y=0", "--t1", "1", "--dt", "0.1"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("log(x)"), "{}", stderr(&out));
}

#[test]
fn failed_expectations_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "drift.lss", DRIFT);
    let out = lsys(&["check-constant", "--spec", arg(&spec), "--points", "10"]);
    assert_eq!(code(&out), 1);
    assert_eq!(json(&out)["passed"], Value::Bool(false));

    let fixed = DRIFT.replace("h = y*exp(-x)", "h = y*exp(-x)\nexpect_conserved = false");
    let out = lsys(&["check-constant", "--spec", arg(&write(&dir, "fixed.lss", &fixed)), "--points", "10"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn parameter_overrides_change_the_constraint() {
    let out = lsys(&["analyze", "--scenario", "example1", "--param", "a=3", "--at", "x=0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(json(&out)["points"][0]["x"][1].as_f64(), Some(3.0));

    let out = lsys(&["analyze", "--scenario", "example1", "--param", "a=zz"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--param a"), "{}", stderr(&out));
}
