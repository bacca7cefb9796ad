use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hazard-search"))
        .args(args)
        .env_remove("HAZARD_SEARCH_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn config_prints_toml_that_loads_back() {
    let out = cli(&["config", "--preset", "gaussian-2d"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("objective = \"gaussian-2d\""));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, &text).unwrap();
    let again = cli(&["config", "--config", path.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(stdout(&again), text);
}

#[test]
fn config_errors_exit_with_one() {
    let out = cli(&["config", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
    assert_eq!(cli(&["run"]).status.code(), Some(1));
}

fn smoke_run(dir: &Path) {
    let out = cli(&[
        "run",
        "--preset",
        "smoke",
        "--seed",
        "4",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("seed    4"));
}

#[test]
fn run_writes_outputs_and_score_checks_them() {
    let dir = tempfile::tempdir().unwrap();
    smoke_run(dir.path());
    let seed_dir = dir.path().join("seed-4");
    for f in [
        "report.json",
        "records.csv",
        "dynamics.csv",
        "stop_trace.csv",
        "domains.csv",
        "metrics.csv",
        "manifest.json",
    ] {
        assert!(seed_dir.join(f).exists(), "missing {f}");
    }
    let report = seed_dir.join("report.json");
    let report = report.to_str().unwrap();

    let ok = cli(&["score", report, "--min-api", "0"]);
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    assert!(stdout(&ok).contains("api:"));

    let too_strict = cli(&["score", report, "--min-f2", "1.5"]);
    assert_eq!(too_strict.status.code(), Some(3));
    assert!(stdout(&too_strict).contains("FAIL"));
}

#[test]
fn baseline_and_ablate_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(cli(&["baseline", "--preset", "smoke", "--out", d])
        .status
        .success());
    assert!(dir.path().join("seed-1/report.json").exists());

    let out = cli(&["ablate", "--preset", "smoke", "--out", d]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("seed,improved_focus,original_focus"));
    assert_eq!(lines.next().unwrap().split(',').count(), 3);
    assert!(dir.path().join("seed-1/improved/report.json").exists());
}

#[test]
fn oracle_writes_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "oracle",
        "--preset",
        "smoke",
        "--resolution",
        "20",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("400 points"));
    let written: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert!(!written.is_empty());
}
