use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn mbqv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbqv")).args(args).env_remove("MBQV_WORKERS").output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = mbqv(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

fn sha256(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn qv_run_example_resolves() {
    let out = stdout(&["qv-run", "--d", "4", "--noise", "dv", "--p-cz", "0.01", "--p-m", "0.01", "--instances", "20", "--seed", "7"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["command"], "qv-run");
    assert_eq!(v["config"]["seed"], "7");
    assert_eq!(v["config"]["dv.p_cz"], "0.01");
    assert_eq!(v["result"]["d"], 4);
    assert_eq!(v["result"]["n_instances"], 20);
    let h = v["result"]["mean_h"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&h));
}

#[test]
fn gkp_channel_fills_defaults() {
    let out = stdout(&["gkp-channel", "--gate", "cnot", "--s-gkp", "18", "--eta", "0.95"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["config"]["gkp.s_cz"], "matched");
    assert_eq!(v["config"]["gkp.xcov"], "0");
    assert_eq!(v["result"]["channel"]["n"], 2);
    let total: f64 = v["result"]["channel"]["terms"].as_array().unwrap().iter().map(|t| t["prob"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn out_of_range_eta_is_rejected() {
    let out = mbqv(&["gkp-channel", "--eta", "1.3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 < eta <= 1"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# dv run\ngate=cnot\ndv.p_cz=0.02\ndv.p_m=0.01\n").unwrap();
    let out = stdout(&["dv-channel", "--config", cfg.to_str().unwrap(), "--p-m", "0.03"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["config"]["gate"], "cnot");
    assert_eq!(v["config"]["dv.p_cz"], "0.02");
    assert_eq!(v["config"]["dv.p_m"], "0.029999999999999999");

    std::fs::write(&cfg, "gkp.squeeze=3\n").unwrap();
    let bad = mbqv(&["dv-channel", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown config key"));
}

#[test]
fn fidelity_curve_csv_columns() {
    let out = stdout(&["fidelity-curve", "--p-grid", "0,0.01,0.02"]);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "gate,case,p,fidelity");
    assert_eq!(lines.len(), 1 + 2 * 3 * 3);
    assert!(lines.contains(&"hadamard,both,0,1"));
    assert!(out.lines().any(|l| l == "# grid.p=0,0.01,0.02"));
}

#[test]
fn sweep_emits_one_row_per_cell() {
    let out = stdout(&[
        "qv-sweep", "--eta-grid", "0.95,1", "--s-grid", "14,20", "--s-cz", "off", "--d-max", "3", "--instances", "8",
    ]);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "eta,s_gkp_db,cz_mode,log2_qv,mean_h,stderr,n_instances,seed");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.94999999999999996,14,off,"));
}

#[test]
fn reruns_are_byte_identical_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 3] = [
        &["qv-run", "--d", "3", "--noise", "gkp", "--s-gkp", "14", "--instances", "12", "--exact-max-width", "2", "--shots", "5"],
        &["qv-sweep", "--eta-grid", "0.9,1", "--s-grid", "12,18", "--d-max", "3", "--instances", "6"],
        &["gkp-channel", "--gkp-mode", "sampled", "--gkp-samples", "200000", "--s-gkp", "9", "--eta", "0.9"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let hashes: Vec<String> = ["1", "8", "8"]
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let path = dir.path().join(format!("out{i}_{j}"));
                let mut full = args.to_vec();
                full.extend(["--workers", w, "--seed", "11", "-o", path.to_str().unwrap()]);
                let out = mbqv(&full);
                assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
                sha256(&path)
            })
            .collect();
        assert!(hashes.iter().all(|h| *h == hashes[0]), "{args:?}");
    }
}

#[test]
fn workers_env_fallback() {
    let out = Command::new(env!("CARGO_BIN_EXE_mbqv"))
        .args(["dv-channel", "--p-cz", "0.01"])
        .env("MBQV_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
