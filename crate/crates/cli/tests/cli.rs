//! End-to-end tests of the `bcomd` binary: subcommand plumbing, artifact
//! formats, and the exit-code contract (0 success, 1 validation failure,
//! 2 infeasibility).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bcomd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcomd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn bcomd")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(&text).unwrap_or_else(|err| panic!("bad json ({err}): {text}"))
}

/// A small feasible trace most tests share.
fn generate_small_trace(dir: &Path) {
    let out = bcomd(
        dir,
        &[
            "generate",
            "--out",
            "small.txt",
            "--n",
            "6",
            "--window",
            "40",
            "--repetitions",
            "3",
            "--shift",
            "2",
            "--seed",
            "7",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_then_measure_reports_fixture_regularity() {
    let dir = tempfile::tempdir().unwrap();
    let out = bcomd(
        dir.path(),
        &[
            "generate",
            "--out",
            "fix.txt",
            "--fixture",
            "vt-small-pt-large",
            "--horizon",
            "8",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = bcomd(dir.path(), &["measure", "--trace", "fix.txt"]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["n"], 3);
    assert_eq!(report["horizon"], 8);
    assert_eq!(report["path_length"], 14.0);
    assert_eq!(report["temporal_variation"], 0.875);
    assert_eq!(report["rho_hat"], 0.25);
    assert_eq!(report["feasible"], true);
}

#[test]
fn run_emits_contract_csv_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    generate_small_trace(dir.path());
    let policy = r#"{"kind":"bcomd-manual","eta":0.02,"mu":0.01,"gamma":0.0001}"#;
    for out_dir in ["a", "b"] {
        let out = bcomd(
            dir.path(),
            &[
                "run", "--trace", "small.txt", "--policy", policy, "--seed", "1,2", "--out",
                out_dir,
            ],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let summary = stdout_json(&out);
        assert_eq!(summary["policy"], "bcomd-manual");
        assert_eq!(summary["horizon"], 120);
        assert!(summary["mean_regret"].as_f64().unwrap().is_finite());
    }
    for name in ["run_s1.csv", "run_s2.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let csv = fs::read_to_string(dir.path().join("a/run_s1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,action,loss,constraint,lambda,cum_loss,cum_violation,comparator_value,regret_prefix"
    );
    assert_eq!(lines.count(), 120);
}

#[test]
fn run_accepts_inline_config_json() {
    let dir = tempfile::tempdir().unwrap();
    generate_small_trace(dir.path());
    let config = r#"{
        "trace": {"source": "file", "path": "small.txt"},
        "policy": {"kind": "exp3", "eta": 0.01, "gamma": 0.001},
        "seeds": [3],
        "emit_csv": false
    }"#;
    let out = bcomd(dir.path(), &["run", "--config", config]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["policy"], "exp3");
    assert_eq!(summary["runs"].as_array().unwrap().len(), 1);
    assert_eq!(summary["runs"][0]["csv_path"], Value::Null);
}

#[test]
fn sweep_ranks_policies_on_one_trace() {
    let dir = tempfile::tempdir().unwrap();
    generate_small_trace(dir.path());
    let out = bcomd(
        dir.path(),
        &[
            "sweep",
            "--trace",
            "small.txt",
            "--policy",
            "bcomd-theorem1",
            "--policy",
            r#"{"kind":"bcomd-manual","eta":0.04,"mu":0.02,"gamma":0.0001}"#,
            "--seed",
            "0,1",
            "--out",
            "swept",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let outcome = stdout_json(&out);
    let rows = outcome["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["error"] == Value::Null));
    assert!(outcome["best"].as_u64().is_some());
    assert!(dir.path().join("swept/sweep.json").is_file());
}

#[test]
fn plot_folds_run_csvs_into_one_data_file() {
    let dir = tempfile::tempdir().unwrap();
    generate_small_trace(dir.path());
    let out = bcomd(
        dir.path(),
        &[
            "run",
            "--trace",
            "small.txt",
            "--policy",
            "bcomd-theorem1",
            "--seed",
            "0,1,2",
            "--out",
            "runs",
        ],
    );
    assert_eq!(code(&out), 0);
    let out = bcomd(dir.path(), &["plot", "runs", "--out", "agg.dat"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let data = fs::read_to_string(dir.path().join("agg.dat")).unwrap();
    let lines: Vec<&str> = data.lines().collect();
    assert_eq!(lines.len(), 2 + 120);
    assert!(lines[0].starts_with('#'));
    assert!(lines[1].starts_with("# t "));
    let first: Vec<&str> = lines[2].split(' ').collect();
    assert_eq!(first.len(), 5);
    assert_eq!(first[0], "1");
}

#[test]
fn malformed_trace_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("broken.txt"), "not a trace\n").unwrap();
    let out = bcomd(dir.path(), &["measure", "--trace", "broken.txt"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema error"));
    let out = bcomd(
        dir.path(),
        &["run", "--trace", "broken.txt", "--policy", "bcomd-theorem1"],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn infeasible_traces_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let noisy = [
        "generate",
        "--out",
        "bad.txt",
        "--n",
        "3",
        "--shift",
        "1",
        "--window",
        "1",
        "--horizon",
        "50",
        "--noise-std",
        "5.0",
    ];
    let out = bcomd(dir.path(), &noisy);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("slater margin"));

    let mut allowed = noisy.to_vec();
    allowed.push("--allow-infeasible");
    let out = bcomd(dir.path(), &allowed);
    assert_eq!(code(&out), 0);
    let out = bcomd(
        dir.path(),
        &[
            "run",
            "--trace",
            "bad.txt",
            "--policy",
            "bcomd-theorem1",
            "--no-csv",
        ],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn usage_failures_exit_one_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    generate_small_trace(dir.path());
    let out = bcomd(
        dir.path(),
        &["run", "--trace", "small.txt", "--policy", "nonsense"],
    );
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown policy"));

    let out = bcomd(dir.path(), &["frobnicate"]);
    assert_eq!(code(&out), 1);

    let out = bcomd(dir.path(), &["run"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config or --trace"));

    let out = bcomd(dir.path(), &["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("generate"));
}

#[test]
fn check_runs_a_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = bcomd(
        dir.path(),
        &["check", "--only", "10", "--out", "report.txt"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("criterion 10 [PASS]"), "{text}");
    let written = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert_eq!(written, text);

    let out = bcomd(dir.path(), &["check", "--only", "99"]);
    assert_eq!(code(&out), 1);
}
