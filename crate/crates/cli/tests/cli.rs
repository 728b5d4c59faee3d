// SPDX-License-Identifier: Apache-2.0

use std::process::{Command, Output};

fn edgesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgesim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn run_then_summarize_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = edgesim(&[
        "--scenario",
        "okpi.corridor",
        "--duration",
        "20",
        "--plugin",
        "orchestrator",
        "--out",
        out_dir,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run_summary = stdout_json(&out);
    assert_eq!(run_summary["ticks"], 200);
    for f in [
        "snapshots.csv",
        "service_time.csv",
        "federation.csv",
        "instructions.csv",
        "summary.json",
    ] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }

    let again = edgesim(&["summarize", out_dir]);
    assert!(again.status.success());
    assert_eq!(stdout_json(&again), run_summary);
}

#[test]
fn overrides_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = edgesim(&[
        "--scenario",
        "okpi.corridor",
        "--duration",
        "5",
        "--tick-ms",
        "50",
        "--seed",
        "3",
        "--plugin",
        "soa",
        "--set",
        "nodes.cloud1.proc_delay_ms=20.0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = stdout_json(&out);
    assert_eq!(s["ticks"], 100);
    assert!(s["service"]["min_ms"].as_f64().unwrap() > 28.0);
}

#[test]
fn errors_exit_nonzero_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let cases: [(&[&str], &str); 4] = [
        (&["--scenario", "missing.toml", "--out", out_dir], "unknown scenario"),
        (&["--scenario", "okpi.corridor", "--set", "links.0.b=\"ghost\"", "--out", out_dir], "links[0].b"),
        (&["--scenario", "okpi.corridor", "--plugin", "nope", "--out", out_dir], "nope"),
        (&["--out", out_dir], "--scenario"),
    ];
    for (args, needle) in cases {
        let out = edgesim(args);
        assert!(!out.status.success(), "{args:?} should fail");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{args:?}: {err}");
    }
}

#[test]
fn summarize_missing_dir_fails() {
    let out = edgesim(&["summarize", "/nonexistent/run"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing trace"));
}

#[test]
fn scenario_file_path_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.toml");
    std::fs::write(
        &path,
        r#"
tick_ms = 100
duration_s = 1
[[nodes]]
id = "R1"
kind = "radio_unit"
[[nodes]]
id = "sw"
kind = "switch"
[[links]]
a = "R1"
b = "sw"
d_ms = 0.1
lambda_mbps = 100.0
"#,
    )
    .unwrap();
    let out = edgesim(&[
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["ticks"], 10);
}
