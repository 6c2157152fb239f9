use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_snls-lab"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn only_run_dir(out: &Path) -> PathBuf {
    let dirs: Vec<_> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs[0].clone()
}

#[test]
fn print_plan_runs_nothing() {
    let out = tempfile::tempdir().unwrap();
    let cfg = config("spatial-mu1.toml");
    let o = run(&[
        "print-plan",
        "--axis",
        "spatial",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("digest: "));
    assert_eq!(fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn usage_and_config_errors_exit_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["run-moments"]).status.code(), Some(2));
    assert_eq!(
        run(&["run-moments", "--config", "/nonexistent/config.toml"])
            .status
            .code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("spatial-mu1.toml"))
        .unwrap()
        .replace("reference = { k_cut = 128", "reference = { k_cut = 64");
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, text).unwrap();
    let o = run(&[
        "run-convergence",
        "--axis",
        "spatial",
        "--config",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("reference K"));
}

#[test]
fn lemma_tests_with_default_config() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["run-lemma-tests", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let dir = only_run_dir(out.path());
    let mut rows = csv::Reader::from_path(dir.join("lemmas.csv")).unwrap();
    let headers = rows.headers().unwrap().clone();
    let pass = headers.iter().position(|h| h == "pass").unwrap();
    let records: Vec<_> = rows.records().map(|r| r.unwrap()).collect();
    assert!(records.len() >= 9000);
    assert!(records.iter().all(|r| &r[pass] == "true"));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "pass");
    assert_eq!(
        dir.file_name().unwrap().to_str().unwrap(),
        &manifest["digest"].as_str().unwrap()[..16]
    );
}

#[test]
fn failed_acceptance_exits_one_with_manifest() {
    // An expectation no scheme meets.
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("temporal-mu4.toml")).unwrap() + "expect = { rate = 3.0, tolerance = 0.01 }\n";
    let cfg = dir.path().join("strict.toml");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "run-convergence",
        "--axis",
        "temporal",
        "--config",
        cfg.to_str().unwrap(),
        "--paths",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let run_dir = only_run_dir(&out);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "fail");
    assert!(run_dir.join("errors.csv").exists() && run_dir.join("rates.csv").exists());
}

#[test]
fn seed_override_changes_run_directory() {
    let cfg = config("lemmas.toml");
    let out = tempfile::tempdir().unwrap();
    for seed in ["1", "2"] {
        let o = run(&[
            "run-lemma-tests",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read_dir(out.path()).unwrap().count(), 2);
}
