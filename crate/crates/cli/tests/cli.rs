//! End-to-end CLI tests: golden outputs (byte identical, the outputs are
//! deterministic), exit codes, and the error-line format.

use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

const KRONECKER_3: &str = "vertices = 2\narrows = [[0, 3], [0, 0]]\n";

fn quiver_file(contents: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f.flush().unwrap();
    f
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quiverdt"))
        .args(args)
        .env_remove("FLOWTREE_SEED")
        .output()
        .unwrap()
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn assert_golden(args: &[&str], golden: &str) {
    let q = quiver_file(KRONECKER_3);
    let path = q.path().to_str().unwrap();
    let args: Vec<&str> = args.iter().map(|&a| if a == "QUIVER" { path } else { a }).collect();
    let out = run(&args);
    assert_eq!(stdout_of(&out), golden, "args: {args:?}");
}

#[test]
fn dt_golden() {
    assert_golden(
        &["dt", "--quiver", "QUIVER", "--gamma", "1,1", "--theta", "1,-1"],
        include_str!("golden/dt.json"),
    );
}

#[test]
fn trees_golden() {
    assert_golden(
        &["trees", "--quiver", "QUIVER", "--parts", "1,0;0,1;0,1", "--theta", "2,-1"],
        include_str!("golden/trees.json"),
    );
}

#[test]
fn walls_golden() {
    assert_golden(
        &["walls", "--quiver", "QUIVER", "--gamma", "1,1", "--theta", "1,-1"],
        include_str!("golden/walls.json"),
    );
}

#[test]
fn oracle_golden() {
    assert_golden(
        &["oracle", "--quiver", "QUIVER", "--gamma", "1,2", "--theta", "2,-1"],
        include_str!("golden/oracle.json"),
    );
}

#[test]
fn tropical_golden() {
    assert_golden(
        &["tropical", "--quiver", "QUIVER", "--parts", "1,0;0,1;0,1", "--theta", "2,-1"],
        include_str!("golden/tropical.json"),
    );
}

#[test]
fn render_golden() {
    assert_golden(
        &["render", "--quiver", "QUIVER", "--parts", "1,0;0,1", "--theta", "1,-1"],
        include_str!("golden/render.json"),
    );
}

#[test]
fn antistable_chamber_gives_zero() {
    let q = quiver_file(KRONECKER_3);
    let out = run(&[
        "dt", "--quiver", q.path().to_str().unwrap(),
        "--gamma", "1,1", "--theta=-1,1",
    ]);
    let text = stdout_of(&out);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["omega"], "0");
}

#[test]
fn project_flag_fixes_off_perp_theta() {
    let q = quiver_file(KRONECKER_3);
    let path = q.path().to_str().unwrap();
    // theta(gamma) != 0 is rejected without --project
    let rejected = run(&["dt", "--quiver", path, "--gamma", "1,1", "--theta", "2,-1"]);
    assert_eq!(rejected.status.code(), Some(2));
    // with --project the projected theta lands in the stable chamber
    let out = run(&[
        "dt", "--quiver", path, "--gamma", "1,1", "--theta", "2,-1", "--project",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(v["omega"], "3");
}

#[test]
fn seed_env_variable_is_honored() {
    let q = quiver_file(KRONECKER_3);
    let path = q.path().to_str().unwrap();
    let flag = run(&[
        "trees", "--quiver", path, "--parts", "1,0;0,1", "--theta", "1,-1", "--seed", "7",
    ]);
    let env = Command::new(env!("CARGO_BIN_EXE_quiverdt"))
        .args(["trees", "--quiver", path, "--parts", "1,0;0,1", "--theta", "1,-1"])
        .env("FLOWTREE_SEED", "7")
        .output()
        .unwrap();
    assert!(env.status.success());
    assert_eq!(stdout_of(&flag), String::from_utf8(env.stdout).unwrap());
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&flag)).unwrap();
    assert_eq!(v["seed"], 7);
}

#[test]
fn missing_file_exits_1_with_parse_error_line() {
    let out = run(&[
        "dt", "--quiver", "/nonexistent/q.toml", "--gamma", "1,1", "--theta", "1,-1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.starts_with("error[parse]: "),
        "stderr was: {stderr}"
    );
    assert_eq!(stderr.lines().count(), 1);
}

#[test]
fn bad_gamma_exits_1() {
    let q = quiver_file(KRONECKER_3);
    let out = run(&[
        "dt", "--quiver", q.path().to_str().unwrap(), "--gamma", "1,x", "--theta", "1,-1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[parse]: "));
}

#[test]
fn non_generic_theta_exits_2() {
    let q = quiver_file(KRONECKER_3);
    let out = run(&[
        "dt", "--quiver", q.path().to_str().unwrap(), "--gamma", "1,1", "--theta", "0,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[genericity]: "));
}

#[test]
fn trees_dot_output_is_dot() {
    let q = quiver_file(KRONECKER_3);
    let out = run(&[
        "trees", "--quiver", q.path().to_str().unwrap(),
        "--parts", "1,0;0,1", "--theta", "1,-1", "--dot",
    ]);
    let text = stdout_of(&out);
    assert!(text.contains("graph"), "not DOT: {text}");
}

#[test]
fn explicit_attractor_table_overrides_default() {
    // an explicit table replaces the acyclic default entirely; with the unit
    // entries restored and Omega_*(1,1) = 5 on top, Omega = 1 + 5 = 6
    let q = quiver_file(concat!(
        "vertices = 2\narrows = [[0, 1], [0, 0]]\n\n",
        "[[attractor]]\ngamma = [1, 0]\nomega = 1\n\n",
        "[[attractor]]\ngamma = [0, 1]\nomega = 1\n\n",
        "[[attractor]]\ngamma = [1, 1]\nomega = 5\n",
    ));
    let out = run(&[
        "dt", "--quiver", q.path().to_str().unwrap(), "--gamma", "1,1", "--theta", "1,-1",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(v["omega"], "6");
}
