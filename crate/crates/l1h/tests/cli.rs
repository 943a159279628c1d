//! Binary-level contract tests: exit codes, trace header, log levels, method
//! rejection, and report fields.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_l1h")
}

fn run_in(dir: &Path, args: &[&str], log: Option<&str>) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args).current_dir(dir);
    match log {
        Some(v) => {
            cmd.env("L1H_LOG", v);
        }
        None => {
            cmd.env_remove("L1H_LOG");
        }
    }
    cmd.output().expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn gen_instance(dir: &Path) {
    let out = run_in(
        dir,
        &[
            "gen", "--m", "30", "--n", "60", "--sbar", "3", "--sigma", "0.01", "--seed", "2",
            "--out", "p.txt",
        ],
        Some("quiet"),
    );
    assert_eq!(exit_code(&out), 0, "gen failed: {out:?}");
}

fn read_json(dir: &Path, name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(name)).expect("report exists");
    serde_json::from_str(&text).expect("report parses")
}

#[test]
fn trace_header_matches_contract() {
    let dirh = tempfile::tempdir().unwrap();
    let dir = dirh.path();
    gen_instance(dir);
    let out = run_in(
        dir,
        &[
            "solve",
            "--problem",
            "p.txt",
            "--lambda-tgt",
            "1.0",
            "--eps",
            "1e-5",
            "--method",
            "pgh",
            "--trace",
            "t.csv",
            "--out",
            "r.json",
        ],
        Some("quiet"),
    );
    assert_eq!(exit_code(&out), 0);
    let trace = std::fs::read_to_string(dir.join("t.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "stage,k,lambda,M,phi,omega,nnz,matvecs,linesearch_steps"
    );
    assert!(trace.lines().count() > 1, "trace has data rows");
}

#[test]
fn both_methods_reach_target_residue() {
    let dirh = tempfile::tempdir().unwrap();
    let dir = dirh.path();
    gen_instance(dir);
    for method in ["pg", "pgh"] {
        let report = format!("{method}.json");
        let out = run_in(
            dir,
            &[
                "solve",
                "--problem",
                "p.txt",
                "--eps",
                "1e-5",
                "--method",
                method,
                "--out",
                &report,
            ],
            Some("quiet"),
        );
        assert_eq!(exit_code(&out), 0, "{method} failed: {out:?}");
        let json = read_json(dir, &report);
        assert_eq!(json["status"], "converged", "{method} status");
        let omega = json["final_omega"].as_f64().unwrap();
        assert!(omega <= 1e-5, "{method} final residue {omega}");
    }
}

#[test]
fn iteration_cap_exits_one_with_honest_report() {
    let dirh = tempfile::tempdir().unwrap();
    let dir = dirh.path();
    gen_instance(dir);
    let out = run_in(
        dir,
        &[
            "solve",
            "--problem",
            "p.txt",
            "--method",
            "pg",
            "--eps",
            "1e-9",
            "--max-iters",
            "1",
            "--out",
            "r.json",
        ],
        Some("quiet"),
    );
    assert_eq!(exit_code(&out), 1);
    let json = read_json(dir, "r.json");
    assert_eq!(json["status"], "max_iterations");
}

#[test]
fn argument_and_io_errors_exit_two() {
    let dirh = tempfile::tempdir().unwrap();
    let dir = dirh.path();
    gen_instance(dir);

    let missing = run_in(dir, &["solve", "--problem", "nope.txt"], Some("quiet"));
    assert_eq!(exit_code(&missing), 2);

    let unknown_flag = run_in(
        dir,
        &["solve", "--problem", "p.txt", "--wat"],
        Some("quiet"),
    );
    assert_eq!(exit_code(&unknown_flag), 2);

    let bad_shape = run_in(
        dir,
        &[
            "gen", "--m", "5", "--n", "4", "--sbar", "9", "--out", "q.txt",
        ],
        Some("quiet"),
    );
    assert_eq!(exit_code(&bad_shape), 2);

    let bad_method = run_in(
        dir,
        &["solve", "--problem", "p.txt", "--method", "sparsa"],
        Some("quiet"),
    );
    assert_eq!(exit_code(&bad_method), 2);
    let stderr = String::from_utf8_lossy(&bad_method.stderr);
    assert!(
        stderr.contains("out of scope") && stderr.contains("pg or pgh"),
        "rejection names the unsupported baselines: {stderr}"
    );
}

#[test]
fn log_levels_gate_the_summary() {
    let dirh = tempfile::tempdir().unwrap();
    let dir = dirh.path();
    gen_instance(dir);
    let solve = ["solve", "--problem", "p.txt", "--method", "pgh"];

    let quiet = run_in(dir, &solve, Some("quiet"));
    assert_eq!(exit_code(&quiet), 0);
    assert!(quiet.stderr.is_empty(), "quiet run logs nothing");

    let default = run_in(dir, &solve, None);
    let text = String::from_utf8_lossy(&default.stderr);
    assert_eq!(text.lines().count(), 1, "default run logs one line: {text}");
    assert!(text.contains("status=converged") && text.contains("matvecs="));

    let debug = run_in(dir, &solve, Some("debug"));
    let text = String::from_utf8_lossy(&debug.stderr);
    assert!(
        text.lines().count() > 1,
        "debug run logs per-stage detail: {text}"
    );
}

#[test]
fn oracle_reports_default_to_stdout() {
    let dirh = tempfile::tempdir().unwrap();
    let dir = dirh.path();
    let out = run_in(
        dir,
        &[
            "gen", "--m", "6", "--n", "8", "--sbar", "2", "--sigma", "0.05", "--seed", "11",
            "--out", "tiny.txt",
        ],
        Some("quiet"),
    );
    assert_eq!(exit_code(&out), 0);

    let eigs = run_in(
        dir,
        &["eigs", "--problem", "tiny.txt", "--s", "2"],
        Some("quiet"),
    );
    assert_eq!(exit_code(&eigs), 0);
    let json: serde_json::Value =
        serde_json::from_slice(&eigs.stdout).expect("eigs emits JSON on stdout");
    assert!(json["rho_minus"].as_f64().unwrap() > 0.0);
    assert!(json["rho_plus"].as_f64().unwrap() >= json["rho_minus"].as_f64().unwrap());

    let check = run_in(dir, &["check", "--problem", "tiny.txt"], Some("quiet"));
    assert_eq!(exit_code(&check), 0);
    let json: serde_json::Value =
        serde_json::from_slice(&check.stdout).expect("check emits JSON on stdout");
    assert!(json["lambda_ok"].is_boolean());
    assert!(json["mixed_re_rhs"].as_f64().is_some());
}
