use std::path::PathBuf;
use std::process::Command;

fn example() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/example.toml")
}

fn rislink() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rislink"))
}

#[test]
fn validate_accepts_example() {
    let out = rislink()
        .args(["validate", "--scenario"])
        .arg(example())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: L=4 K=2"));
}

#[test]
fn validate_reports_bad_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "bs_antennas = 0\n").unwrap();
    let out = rislink().args(["validate", "--scenario"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = rislink()
        .args(["run", "--task", "wsr", "--trials", "2", "--seed", "5", "--scenario"])
        .arg(example())
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["metrics.csv", "timings.csv", "summary.txt", "traces.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
}

#[test]
fn unknown_task_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = rislink()
        .args(["run", "--task", "nope", "--scenario"])
        .arg(example())
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}
