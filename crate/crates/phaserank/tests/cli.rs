use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phaserank"))
}

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

#[test]
fn analyze_prints_class_and_bound() {
    let out = bin().args(["analyze", "--report", "class"]).arg(corpus("nested_loops.koat")).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "O(n^2)\n");
    let out = bin().arg("analyze").arg(corpus("two_phase.koat")).args(["--mdepth", "1"]).output().unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("INF INF"));
}

#[test]
fn json_records_parse() {
    let out = bin().args(["analyze", "--json"]).arg(corpus("three_phase.koat")).arg(corpus("empty_rules.koat")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let recs: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0]["overall"], "27*x+27*y+27*z+56");
    assert_eq!(recs[0]["class"], "O(n)");
    assert!(recs[0]["proof_log"].as_array().unwrap().iter().any(|l| l.as_str().unwrap().starts_with("MPRF d=3")));
    assert_eq!(recs[1]["overall"], "0");
}

#[test]
fn bad_input_and_bad_flags() {
    let dir = std::env::temp_dir().join(format!("phaserank-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.koat");
    std::fs::write(&bad, "(RULES l0(x) -> )").unwrap();
    let out = bin().arg("analyze").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let out = bin().args(["analyze", "--mdepth", "0"]).arg(corpus("two_phase.koat")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["analyze", "--cfr", "sometimes"]).arg(corpus("two_phase.koat")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn batch_matches_golden_output() {
    let out = bin().arg("batch").arg(corpus("")).args(["--no-timings", "--jobs", "3"]).output().unwrap();
    assert!(out.status.success());
    let golden = std::fs::read_to_string(corpus("batch.golden")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
}
