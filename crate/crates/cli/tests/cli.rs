// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn tcpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcpd"))
        .args(args)
        .env_remove("TCPD_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn noiseless_spec(dir: &Path) -> std::path::PathBuf {
    let p = 6;
    let means: Vec<Vec<f64>> = (0..5).map(|k| vec![if k % 2 == 0 { 0.0 } else { 20.0 }; p]).collect();
    let spec = json!({
        "n": 1500,
        "shape": [p],
        "changepoints": [300, 600, 900, 1200],
        "means": means,
        "noise": {"kind": "iid", "sigma": 0.0},
        "seed": 0
    });
    let path = dir.join("truth.json");
    std::fs::write(&path, spec.to_string()).unwrap();
    path
}

fn detect_json(args: &[&str]) -> Value {
    let o = tcpd(args);
    assert!(o.status.success(), "detect failed: {}", stderr(&o));
    serde_json::from_str(&stdout(&o)).expect("valid json")
}

#[test]
fn simulate_then_detect_recovers_noiseless_truth() {
    let dir = tempfile::tempdir().unwrap();
    let spec = noiseless_spec(dir.path());
    for ext in ["tcpd", "csv"] {
        let out = dir.path().join(format!("seq.{ext}"));
        let o = tcpd(&["simulate", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let sidecar: Value =
            serde_json::from_str(&std::fs::read_to_string(format!("{}.spec.json", out.display())).unwrap()).unwrap();
        assert_eq!(sidecar["changepoints"], json!([300, 600, 900, 1200]));

        let v = detect_json(&["detect", out.to_str().unwrap(), "--json"]);
        assert_eq!(v["schema"], 1);
        assert_eq!(v["n"], 1500);
        assert_eq!(v["detection"]["k_hat"], 4);
        let found: Vec<i64> = v["detection"]["locations"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_i64().unwrap())
            .collect();
        for (z, truth) in found.iter().zip([300, 600, 900, 1200]) {
            assert!((z - truth).abs() <= 1, "{found:?}");
        }
    }
}

#[test]
fn detect_is_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.tcpd");
    let o = tcpd(&["simulate", "--design", "dense", "--p", "200", "--seed", "11", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let args = ["detect", out.to_str().unwrap(), "--ci", "--ci-paths", "20000", "--seed", "4", "--json"];
    let a = tcpd(&args);
    let b = tcpd(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let seq = tcpd(&["--sequential", "detect", out.to_str().unwrap(), "--ci", "--ci-paths", "20000", "--seed", "4", "--json"]);
    assert_eq!(a.stdout, seq.stdout);
}

#[test]
fn text_report_lists_intervals_and_times() {
    let dir = tempfile::tempdir().unwrap();
    let spec = noiseless_spec(dir.path());
    let out = dir.path().join("seq.tcpd");
    assert!(tcpd(&["simulate", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let o = tcpd(&["detect", out.to_str().unwrap(), "--rate", "100"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("estimated changes: 4"), "{text}");
    assert!(text.contains("t = 3.01"), "{text}");
    assert!(text.contains("t = 12.01"));
    assert!(text.contains("kept"));
}

#[test]
fn bad_magic_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tcpd");
    std::fs::write(&path, b"NOPE\x01\x00\x01\x00").unwrap();
    let o = tcpd(&["detect", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not a TCPD file"));
}

#[test]
fn short_series_exits_2_with_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    let mut text = String::from("t,v1,v2\n");
    for t in 1..=100 {
        text.push_str(&format!("{t},{},{}\n", t % 3, t % 5));
    }
    std::fs::write(&path, text).unwrap();
    let o = tcpd(&["detect", path.to_str().unwrap(), "--alpha", "40"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("120"), "{}", stderr(&o));
}

#[test]
fn invalid_flags_and_config_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = noiseless_spec(dir.path());
    let out = dir.path().join("seq.tcpd");
    assert!(tcpd(&["simulate", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let seq = out.to_str().unwrap();

    assert_eq!(tcpd(&["detect", seq, "--tau", "1.5"]).status.code(), Some(2));
    assert_eq!(tcpd(&["detect", seq, "--mode", "nope"]).status.code(), Some(2));
    assert_eq!(tcpd(&["bench", "--scenario", "unknown"]).status.code(), Some(2));

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "mode = sfd\nwindow = 3\n").unwrap();
    let o = tcpd(&["detect", seq, "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("window"));
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let spec = noiseless_spec(dir.path());
    let out = dir.path().join("seq.tcpd");
    assert!(tcpd(&["simulate", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "alpha = 50\ntau = 0.7\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tcpd"))
        .args(["detect", out.to_str().unwrap(), "--json"])
        .env("TCPD_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["detection"]["alpha"], 50);
    assert_eq!(v["tau"], 0.7);
    assert_eq!(v["detection"]["k_hat"], 4);
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let spec = noiseless_spec(dir.path());
    let missing = dir.path().join("no/such/dir/seq.tcpd");
    let o = tcpd(&["simulate", "--spec", spec.to_str().unwrap(), "--out", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let out = dir.path().join("seq.tcpd");
    assert!(tcpd(&["simulate", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let svg = dir.path().join("no/plot.svg");
    let o = tcpd(&["plot", out.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn plot_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let spec = noiseless_spec(dir.path());
    let out = dir.path().join("seq.tcpd");
    assert!(tcpd(&["simulate", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let svg = dir.path().join("plot.svg");
    let o = tcpd(&["plot", out.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches(r#"<line class="zhat""#).count(), 4);
}

#[test]
fn bench_writes_jsonl_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("runs.jsonl");
    let o = tcpd(&["bench", "--scenario", "sym-p10-msfd", "--reps", "2", "--seed", "9", "--jsonl", jsonl.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("MSFD"));
    let text = std::fs::read_to_string(&jsonl).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!lines.is_empty());
    let again = dir.path().join("again.jsonl");
    let o = tcpd(&["bench", "--scenario", "sym-p10-msfd", "--reps", "2", "--seed", "9", "--jsonl", again.to_str().unwrap()]);
    assert!(o.status.success());
    let strip = |s: &str| -> Vec<Value> {
        s.lines()
            .map(|l| {
                let mut v: Value = serde_json::from_str(l).unwrap();
                if let Some(m) = v.as_object_mut() {
                    m.remove("micros");
                }
                v
            })
            .collect()
    };
    assert_eq!(strip(&text), strip(&std::fs::read_to_string(&again).unwrap()));
}

#[test]
fn help_lists_subcommands() {
    let o = tcpd(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for cmd in ["detect", "simulate", "bench", "plot"] {
        assert!(text.contains(cmd));
    }
}
