use std::path::Path;
use std::process::{Command, Output};

fn chbl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chbl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn simulate_to(path: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "simulate",
        "--scheme",
        "uniform",
        "--capacity",
        "3",
        "--epsilon",
        "0.5",
        "--m",
        "100",
        "--trace-len",
        "80",
        "--window",
        "40",
        "--out",
        path.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    chbl(&args)
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    assert!(simulate_to(&a, &[]).status.success());
    assert!(simulate_to(&b, &[]).status.success());
    let a = std::fs::read(a).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(b).unwrap());
}

#[test]
fn every_line_carries_the_schema_version() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.jsonl");
    assert!(simulate_to(&path, &[]).status.success());
    let text = std::fs::read_to_string(path).unwrap();
    let kinds: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .inspect(|v| assert_eq!(v["schema_version"], 1))
        .skip(1)
        .map(|v| v["kind"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(kinds, ["steady_state", "window", "window", "summary"]);
}

#[test]
fn csv_output_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    assert!(simulate_to(&path, &["--format", "csv"]).status.success());
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema=chbl-metrics"));
    assert!(lines.next().unwrap().starts_with("schema_version,kind,"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn raw_dump_has_one_line_per_operation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.jsonl");
    let raw = dir.path().join("raw.jsonl");
    assert!(simulate_to(&out, &["--raw", raw.to_str().unwrap()])
        .status
        .success());
    let text = std::fs::read_to_string(raw).unwrap();
    assert_eq!(text.lines().count(), 81);
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(
        chbl(&["simulate", "--capacity", "3"]).status.code(),
        Some(2)
    );
    assert_eq!(
        chbl(&["simulate", "--capacity", "3", "--balance-c", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(chbl(&["simulate", "--mix", "1:2"]).status.code(), Some(2));
    assert_eq!(chbl(&["frobnicate"]).status.code(), Some(2));
    let out = chbl(&["simulate", "--capacity", "1", "--n", "50", "--m", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("do not fit"));
}

#[test]
fn verify_passes_and_fault_fails() {
    let args = [
        "verify",
        "--n",
        "40",
        "--m",
        "20",
        "--trials",
        "2",
        "--trace-len",
        "60",
    ];
    let ok = chbl(&args);
    assert_eq!(ok.status.code(), Some(0));
    let log = String::from_utf8_lossy(&ok.stderr);
    for scheme in ["single", "uniform", "geometric"] {
        for hash in ["random", "mixedtab"] {
            assert!(log.lines().any(|l| l.contains(scheme) && l.contains(hash)));
        }
    }
    assert!(log.lines().last().unwrap().starts_with("PASS"));

    let mut faulty = args.to_vec();
    faulty.extend(["--inject-fault", "pass-off-by-one"]);
    let bad = chbl(&faulty);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("FAIL pass_reconciliation"));
}

#[test]
fn oracle_writes_one_record_per_trial() {
    let out = chbl(&[
        "oracle",
        "--capacity",
        "4",
        "--epsilon",
        "0.25",
        "--m",
        "200",
        "--trials",
        "7",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let trials = text
        .lines()
        .filter(|l| l.contains("\"oracle_trial\""))
        .count();
    assert_eq!(trials, 7);
}

#[test]
fn sweep_warns_on_infeasible_points() {
    let out = chbl(&[
        "sweep",
        "--n",
        "500",
        "--m",
        "100",
        "--epsilons",
        "0.5",
        "--capacities",
        "2,8",
        "--trace-len",
        "20",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"warning\""));
    assert!(text.contains("\"sweep_point\""));
}
