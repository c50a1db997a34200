//! End-to-end checks of the binary: subcommands, artifacts, exit codes.

use std::path::Path;
use std::process::Command;

fn gridbench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridbench"))
}

fn write_config(dir: &Path, arch: &str) -> std::path::PathBuf {
    let out = dir.join("out");
    let raw = format!(
        r#"
[run]
architecture = "{arch}"
cn_count = 1
households_per_cn = 2
repetitions = 1
mcb_workers = [1, 2]
output_dir = "{}"

[month]
year = 2009
month = 1
days = 28

[datagen]
seed = 9

[sweep]
households = [3]
workers = [1, 2]
repetitions = 1
"#,
        out.display()
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, raw).unwrap();
    path
}

#[test]
fn generate_dumps_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "A1");
    let csv = dir.path().join("data.csv");
    let status = gridbench().args(["generate", "--config"]).arg(&config).arg("--out").arg(&csv).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("household,slot,kwh\n"));
    // 2 households x 28 days x 96 slots plus the header.
    assert_eq!(text.lines().count(), 1 + 2 * 28 * 96);
}

#[test]
fn run_writes_artifacts_and_report_renders_them() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "A3");
    let out = gridbench().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("bill checksum:"), "{stdout}");
    let csv = dir.path().join("out/report.csv");
    assert!(csv.exists());

    let rendered = gridbench().args(["report", "--csv"]).arg(&csv).output().unwrap();
    assert_eq!(rendered.status.code(), Some(0));
    assert!(String::from_utf8(rendered.stdout).unwrap().contains("ingest: 28 days"));
}

#[test]
fn sweep_emits_matrix_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "A1");
    let status = gridbench().args(["sweep", "--config"]).arg(&config).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let times = std::fs::read_to_string(dir.path().join("out/sweep_times.csv")).unwrap();
    assert!(times.starts_with("workers,h3\n1,"), "{times}");
    assert!(dir.path().join("out/sweep_speedup.csv").exists());
}

#[test]
fn verify_agrees_across_architectures() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "A1");
    let out = gridbench().args(["verify", "--config"]).arg(&config).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("VERIFIED"), "{stdout}");
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[run]\narchitecture = \"A9\"\n").unwrap();
    let status = gridbench().args(["run", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let missing = gridbench().args(["run", "--config", "/nonexistent.toml"]).status().unwrap();
    assert_eq!(missing.code(), Some(2));
}
