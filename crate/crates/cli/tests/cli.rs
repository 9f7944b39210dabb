use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn mfcache(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfcache"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn validate_defaults_succeeds() {
    let out = mfcache(&["validate"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rate"));
}

#[test]
fn invalid_scenario_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[geometry]\nlambda_b = -0.1\n").unwrap();
    let out = mfcache(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry.lambda_b"));

    std::fs::write(&bad, "[geometry]\nlambda_q = 1.0\n").unwrap();
    assert_eq!(code(&mfcache(&["validate", "--scenario", bad.to_str().unwrap()])), 2);
}

#[test]
fn cfl_violation_exits_with_validation_code() {
    let out = mfcache(&["solve", "--grid-nt", "11", "--quiet"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_scenario_file_is_an_io_error() {
    let out = mfcache(&["validate", "--scenario", "/nonexistent/scenario.toml"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = mfcache(&["solve", "--quiet", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfcache(&["solve", "--quiet", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["manifest.txt", "scenario.toml", "solution.csv", "residuals.csv"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("config_sha256 = "));
    assert!(manifest.contains("seed = 2024"));
}

#[test]
fn compare_is_reproducible_for_a_fixed_seed() {
    let smoke = scenario("smoke.toml");
    let run = |dir: &Path| {
        let out = mfcache(&[
            "compare",
            "--quiet",
            "--seed",
            "7",
            "--scenario",
            smoke.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(a.path());
    run(b.path());
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert_eq!(x, y, "{n:?} differs");
    }
}
