use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &["--problem", "synthetic", "--set", "problem.synthetic.n=12", "--set", "problem.synthetic.axis_sizes=[4, 3]"];

fn randpgd(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randpgd"))
        .args(args)
        .env("RANDPGD_OUTPUT_ROOT", out)
        .output()
        .expect("binary runs")
}

fn small(out: &Path, args: &[&str]) -> Output {
    let all: Vec<&str> = args.iter().chain(SMALL).copied().collect();
    randpgd(out, &all)
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(String::from)
        .collect()
}

#[test]
fn rank_zero_writes_one_history_row() {
    let d = tempfile::tempdir().unwrap();
    let o = small(d.path(), &["solve", "--rank", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&d.path().join("solve/history.csv"));
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("0,"));
}

#[test]
fn solve_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(small(d.path(), &["solve", "--rank", "3", "--seed", "7"]).status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("solve/history.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let text = String::from_utf8(read(&a)).unwrap();
    assert!(text.starts_with("# generator: randpgd"));
    assert!(text.contains("# seed: 7"));
}

#[test]
fn small_w_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(small(d.path(), &["certify", "--w", "2.7"]).status.code(), Some(2));
    assert_eq!(small(d.path(), &["solve", "--set", "sketch.nonsense=1"]).status.code(), Some(2));
    assert_eq!(randpgd(d.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn m_max_one_runs_one_iteration() {
    let d = tempfile::tempdir().unwrap();
    let o = small(d.path(), &["certify", "--m-max", "1", "--K", "3", "--tol", "1e-12"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&d.path().join("certify/history.csv")).len(), 1);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("certify/report.json")).unwrap()).unwrap();
    assert!(report["provenance"]["config_hash"].is_string());
}

#[test]
fn dual_rank_cap_has_its_own_exit_code() {
    let d = tempfile::tempdir().unwrap();
    let o = small(d.path(), &["certify", "--K", "4", "--tol", "1e-14", "--l-max", "1", "--alpha", "1.0000001"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn table1_has_24_rows() {
    let d = tempfile::tempdir().unwrap();
    assert!(randpgd(d.path(), &["bench", "table1"]).status.success());
    let rows = data_rows(&d.path().join("bench/table1.csv"));
    assert_eq!(rows.len(), 24);
    assert_eq!(rows[0], "1e-2,1e0,2e0,24");
}

#[test]
fn output_root_env_and_flag() {
    let env_root = tempfile::tempdir().unwrap();
    let flag_root = tempfile::tempdir().unwrap();
    assert!(small(env_root.path(), &["solve", "--rank", "1"]).status.success());
    assert!(env_root.path().join("solve/primal.rpgd").exists());
    let flag = flag_root.path().to_str().unwrap();
    assert!(small(env_root.path(), &["export", "--out", flag]).status.success());
    assert!(flag_root.path().join("export/synthetic/manifest.json").exists());
    assert!(!env_root.path().join("export").exists());
}

#[test]
fn estimate_reuses_a_saved_sketch_and_primal() {
    let d = tempfile::tempdir().unwrap();
    assert!(small(d.path(), &["solve", "--rank", "2"]).status.success());
    let primal = d.path().join("solve/primal.rpgd");
    let p = primal.to_str().unwrap();
    let o = small(d.path(), &["estimate", "--primal", p, "--K", "4", "--L", "2", "--truth"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read_to_string(d.path().join("estimate/estimates.csv")).unwrap();
    assert!(d.path().join("estimate/effectivity.json").exists());

    let sketch = d.path().join("sketch.json");
    std::fs::copy(d.path().join("estimate/sketch.json"), &sketch).unwrap();
    let o = small(d.path(), &["estimate", "--primal", p, "--sketch", sketch.to_str().unwrap(), "--L", "2", "--truth"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let second = std::fs::read_to_string(d.path().join("estimate/estimates.csv")).unwrap();
    let body = |s: &str| s.lines().filter(|l| !l.starts_with('#')).map(String::from).collect::<Vec<_>>();
    assert_eq!(body(&first), body(&second));
}

#[test]
fn exported_problem_solves_identically() {
    let d = tempfile::tempdir().unwrap();
    assert!(small(d.path(), &["export"]).status.success());
    assert!(small(d.path(), &["solve", "--rank", "2"]).status.success());
    let direct = data_rows(&d.path().join("solve/history.csv"));
    let manifest = d.path().join("export/synthetic/manifest.json");
    let o = randpgd(d.path(), &["solve", "--rank", "2", "--manifest", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(direct, data_rows(&d.path().join("solve/history.csv")));

    let idx = small(d.path(), &["export", "--tensor", d.path().join("solve/primal.rpgd").to_str().unwrap(), "--index", "1,2"]);
    assert!(idx.status.success());
    let text = std::fs::read_to_string(d.path().join("export/solution_1_2.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 12);
    let bad = small(d.path(), &["export", "--tensor", d.path().join("solve/primal.rpgd").to_str().unwrap(), "--index", "9,9"]);
    assert_eq!(bad.status.code(), Some(2));
}
