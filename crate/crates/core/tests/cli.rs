use std::fs;
use std::process::Command;

use auction_sim::cli::run;

fn scenario(dir: &std::path::Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.json");
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
    "aps": 10,
    "handhelds": {"count": 8, "strategy": "combined"},
    "rounds": 1,
    "ticksPerRound": 40,
    "seed": 3
}"#;

#[test]
fn writes_csv_reports() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), SMALL);
    let out = dir.path().join("out");
    let code = run(["--scenario", s.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(code, 0);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("node,balance,bidsWon,auctionsRun,dropped,finesPaid\n"));
    assert_eq!(metrics.lines().count(), 19);
    let ledger = fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert!(ledger.starts_with("transactionId,payer,payee,amount\n"));
    let tx = fs::read_to_string(out.join("transactions.csv")).unwrap();
    assert!(tx.starts_with("transactionId,tick,origin,dest,outcome,failedAt,hopsUsed,chain\n"));
    assert_eq!(tx.lines().count(), 41);
}

#[test]
fn writes_json_reports() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), SMALL);
    let out = dir.path().join("out");
    let code = run(["--scenario", s.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "json", "--quiet"]);
    assert_eq!(code, 0);
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["global"]["totalTransactions"], 40);
    assert_eq!(metrics["perNode"].as_array().unwrap().len(), 18);
    let tx: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("transactions.json")).unwrap()).unwrap();
    assert_eq!(tx.as_array().unwrap().len(), 40);
    assert!(out.join("ledger.csv").exists());
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario(dir.path(), SMALL);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        let code = run([
            "--scenario",
            s.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
            "--rounds",
            "2",
            "--quiet",
        ]);
        assert_eq!(code, 0);
    }
    let read = |d: &std::path::Path| fs::read(d.join("transactions.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(String::from_utf8(read(&a)).unwrap().lines().count(), 81);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(["--seed", "1"]), 1);
    assert_eq!(run(["--scenario", "x.json", "--format", "xml"]), 1);
    let bad = scenario(dir.path(), r#"{"aps": 1}"#);
    assert_eq!(run(["--scenario", bad.to_str().unwrap(), "--quiet"]), 2);
    let missing = dir.path().join("missing.json");
    assert_eq!(run(["--scenario", missing.to_str().unwrap(), "--quiet"]), 3);

    let good = scenario(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    assert_eq!(run(["--scenario", good.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]), 3);
}

#[test]
fn binary_reports_errors_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let bad = scenario(dir.path(), r#"{"radioRadius": -1}"#);
    let out =
        Command::new(env!("CARGO_BIN_EXE_auction-sim")).args(["--scenario", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radioRadius"));

    let good = scenario(dir.path(), SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_auction-sim"))
        .args(["--scenario", good.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("40 transactions"));
}
