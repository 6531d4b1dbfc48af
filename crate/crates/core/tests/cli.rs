use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_isonfs");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["nfs"]).status.code(), Some(2));
    assert_eq!(run(&["catalog", "--isomer", "nope"]).status.code(), Some(1));
    assert_eq!(run(&["alpha-k", "--r4", "328", "--r12", "1.8", "--rb", "0.9"]).status.code(), Some(1));
    assert_eq!(run(&["flux"]).status.code(), Some(0));
}

#[test]
fn alpha_k_matches_published_rates() {
    let v = json(&["alpha-k", "--r4", "328", "--r12", "7.3", "--rb", "0.9", "--sigma-r4", "6", "--sigma-r12", "0.9"]);
    let a = v["result"]["alpha_k"].as_f64().unwrap();
    let s = v["result"]["sigma"].as_f64().unwrap();
    assert!((a - 390.0).abs() <= 10.0, "{a}");
    assert!((45.0..=80.0).contains(&s), "{s}");
    assert_eq!(v["meta"]["tool"], "isonfs");
}

#[test]
fn nfs_output_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = run(&[
            "nfs", "--xi", "2.25", "--dgamma", "0,500", "--samples", "65536", "--t-max-ms", "100",
            "--out", p.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("t_ms,rate_ph_per_s_dgamma_0,rate_ph_per_s_dgamma_500\n"));
    assert!(!text.contains('\r'));
    assert!(dir.path().join("a.csv.meta.json").exists());
}

#[test]
fn summary_written_to_file_and_env_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let cat_path = dir.path().join("cat.toml");
    let dumped = run(&["catalog", "--dump"]);
    assert!(dumped.status.success());
    std::fs::write(&cat_path, &dumped.stdout).unwrap();
    let summary = dir.path().join("s.json");
    let out = Command::new(BIN)
        .env("ISONFS_CATALOG", &cat_path)
        .args(["--summary", summary.to_str().unwrap(), "flux"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    let f = v["result"]["rows"][0]["flux"].as_f64().unwrap();
    assert!((f - 2.2).abs() < 0.066, "{f}");
}

#[test]
fn broken_catalog_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[beamline]\nEp_mJ = \n").unwrap();
    let out = run(&["--catalog", p.to_str().unwrap(), "flux"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn simulate_then_band_rate() {
    let dir = tempfile::tempdir().unwrap();
    let ev = dir.path().join("ev.csv");
    let out = run(&["--seed", "3", "simulate", "--duration", "9000", "--out", ev.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let head = std::fs::read_to_string(&ev).unwrap();
    assert!(head.starts_with("pulse_id,detector,t_ms,E_keV\n"));
    let v = json(&["band-rate", "--events", ev.to_str().unwrap()]);
    let r = v["result"]["rate_counts_per_keV_per_1e4_s"].as_f64().unwrap();
    let s = v["result"]["sigma_counts_per_keV_per_1e4_s"].as_f64().unwrap();
    assert!((r - 328.0).abs() < 4.0 * s, "{r} ± {s}");
}
