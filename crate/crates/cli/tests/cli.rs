use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn collusion(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_collusion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn epsilon_table_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eps");
    let o = collusion(&["epsilon_table", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out.join("epsilon_table.csv"));
    for prefix in ["10,1,3.16,", "50,1,7.07,", "50,2,14.14,", "100,1,10.00,"] {
        assert!(csv.lines().any(|l| l.starts_with(prefix)), "{prefix} missing in\n{csv}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["experiment"], "epsilon_table");
    assert_eq!(manifest["files"][0]["name"], "epsilon_table.csv");
}

#[test]
fn smoke_scalar_sweep_is_fast_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let t = Instant::now();
    for d in [&a, &b] {
        let o = collusion(&["scalar-sweep", "--profile", "smoke", "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(t.elapsed().as_secs() < 20);
    assert_eq!(read(&a.join("cells.csv")), read(&b.join("cells.csv")));
    assert!(a.join("gates.json").exists());

    let fig = dir.path().join("fig1a.csv");
    let o = collusion(&[
        "regen-figure",
        "--figure",
        "fig1a",
        "--input",
        a.join("cells.csv").to_str().unwrap(),
        "--out",
        fig.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<String> = read(&fig).lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), 30);
    assert_eq!(rows.iter().filter(|r| r.contains("predicted")).count(), 15);

    let o = collusion(&["scalar-sweep", "--profile", "smoke", "--seed", "43", "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(read(&a.join("cells.csv")), read(&dir.path().join("c/cells.csv")));
}

#[test]
fn audit_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let pass = dir.path().join("pass");
    let o = collusion(&["audit_e2e", "--out", pass.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(&pass.join("verdict.json"))).unwrap();
    assert_eq!(v["status"], "PASS");
    assert!((v["eps_audit_headline"].as_f64().unwrap() - 3.1623).abs() < 1e-4);
    assert!(pass.join("ledger/records.bin").exists());

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"experiment": "audit_e2e", "mutation": "inflated_root"}"#).unwrap();
    let fail = dir.path().join("fail");
    let o = collusion(&["run", "--config", cfg.to_str().unwrap(), "--out", fail.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&read(&fail.join("verdict.json"))).unwrap();
    assert_eq!(v["status"], "FAIL");
    assert_eq!(v["witnesses"][0]["check"], "ledger_integrity");
    assert!(v["eps_audit_full"].is_null());
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    std::fs::write(&cfg, r#"{"trails": 10}"#).unwrap();
    let o = collusion(&["scalar_sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trails"));

    std::fs::write(&cfg, "{\n \"trials\": 10,,\n}").unwrap();
    let o = collusion(&["scalar_sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn estimator_smoke_and_fig3a() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est");
    let o = collusion(&["estimator_calibration", "--profile", "smoke", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let fig = dir.path().join("fig3a.csv");
    let o = collusion(&[
        "regen_figure",
        "--figure",
        "fig3a",
        "--input",
        out.join("null.csv").to_str().unwrap(),
        "--out",
        fig.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(&fig).lines().count(), 17);
    let fig = dir.path().join("fig3b.csv");
    collusion(&["regen_figure", "--figure", "fig3b", "--input", out.join("cells.csv").to_str().unwrap(), "--out", fig.to_str().unwrap()]);
    assert_eq!(read(&fig).lines().count(), 1 + 3 * 16);
}

#[test]
fn cost_table_and_missing_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cost");
    assert_eq!(collusion(&["cost_table", "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let csv = read(&out.join("cost_table.csv"));
    assert_eq!(csv.lines().count(), 9);
    let o = collusion(&[
        "regen_figure",
        "--figure",
        "figA1",
        "--input",
        out.join("cost_table.csv").to_str().unwrap(),
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing columns"));
}

#[test]
fn smoke_topk_external_and_alternatives_run() {
    let dir = tempfile::tempdir().unwrap();
    for exp in ["topk_sweep", "external_vs_same", "alt_adversaries"] {
        let out = dir.path().join(exp);
        let o = collusion(&[exp, "--profile", "smoke", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{exp}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let fig = dir.path().join("figA1.csv");
    let o = collusion(&[
        "regen_figure",
        "--figure",
        "figA1",
        "--input",
        dir.path().join("external_vs_same/comparisons.csv").to_str().unwrap(),
        "--out",
        fig.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(&fig).lines().count(), 1 + 2 * 3);
}
