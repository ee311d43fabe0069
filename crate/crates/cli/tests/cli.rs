use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pipeplan"));
    c.env_remove("RUST_BACKTRACE");
    c
}

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel)
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

#[test]
fn simulate_twice_writes_identical_files() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = run(bin()
            .arg("simulate")
            .arg(fixture("drift/bandwidth.json"))
            .arg("--out")
            .arg(d.path()));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 4, "{names:?}");
    for name in names {
        let a = fs::read(dirs[0].path().join(&name)).unwrap();
        let b = fs::read(dirs[1].path().join(&name)).unwrap();
        assert!(a == b, "{name:?} differs between runs");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dirs[0].path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
}

#[test]
fn oracle_requires_the_flag() {
    let out = run(bin().args(["oracle", "--instances", "2"]));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--exhaustive"));
}

#[test]
fn oracle_writes_one_row_per_instance() {
    let out = run(bin().args(["oracle", "--exhaustive", "--instances", "5", "--max-queries", "4"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rd = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(rd.records().count(), 5);
}

#[test]
fn plan_prints_a_candidate_set() {
    let out = run(bin().args(["plan", "--pipeline", "ACG", "--budget-seconds", "2", "--seed", "3"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
}

#[test]
fn plan_rejects_unknown_pipeline() {
    let out = run(bin().args(["plan", "--pipeline", "NOPE"]));
    assert!(!out.status.success());
}

#[test]
fn compare_needs_two_configs() {
    let out = run(bin().arg("compare").arg(fixture("drift/bandwidth.json")));
    assert!(!out.status.success());
}
