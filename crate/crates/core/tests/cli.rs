use std::process::{Command, Output};

fn advlab(args: &[&str], workers: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advlab"))
        .args(args)
        .env("ADVLAB_WORKERS", workers)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str], workers: &str) -> Vec<u8> {
    let out = advlab(args, workers);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

const SMALL: &[&[&str]] = &[
    &["flip-sweep", "--d", "60", "--m", "80", "--trials", "25", "--seed", "3"],
    &["flip-sweep", "--dims", "40,40,40,1", "--trials", "25", "--seed", "3", "--s0", "2,6"],
    &["flip-sweep", "--d", "60", "--m", "60", "--trials", "10", "--rule", "theorem3", "--xi", "0.1"],
    &["decompose", "--d", "60", "--m", "80", "--trials", "25", "--seed", "4"],
    &["layer-stats", "--dims", "40,50,60,1", "--trials", "25", "--seed", "5"],
    &["theorem3-check", "--d", "100,10000", "--m", "100", "--xi", "0.05,0.5"],
    &["stein-check", "--samples", "20000", "--seed", "6"],
    &["ep-sup", "--m", "200", "--delta", "0.05,0.1", "--trials", "6", "--grid", "3"],
    &["bounds", "--d", "60", "--m", "60", "--trials", "25", "--delta", "0.1,0.3"],
    &["calibrate-constants", "--d", "80", "--m", "200", "--trials", "60", "--grid", "3"],
];

#[test]
fn every_subcommand_is_identical_across_worker_counts() {
    for args in SMALL {
        let one = run_ok(args, "1");
        let eight = run_ok(args, "8");
        assert!(!one.is_empty());
        assert_eq!(one, eight, "{args:?}");
        assert!(!one.contains(&b'\r'));
    }
}

#[test]
fn per_trial_output_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for w in ["1", "8"] {
        let summary = dir.path().join(format!("summary{w}.csv"));
        let trials = dir.path().join(format!("trials{w}.csv"));
        let args = [
            "flip-sweep", "--d", "50", "--m", "50", "--trials", "30", "--out",
            summary.to_str().unwrap(), "--per-trial-out", trials.to_str().unwrap(),
        ];
        assert!(run_ok(&args, w).is_empty());
        files.push((std::fs::read(summary).unwrap(), std::fs::read(trials).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    let trials = String::from_utf8(files[0].1.clone()).unwrap();
    assert_eq!(trials.lines().count(), 1 + 30 * 3);
}

#[test]
fn validation_errors_exit_with_one() {
    for args in [
        &["flip-sweep", "--trials", "0"][..],
        &["flip-sweep", "--activation", "nonsense"],
        &["flip-sweep", "--unknown-flag"],
        &["bounds", "--delta", "1.5", "--d", "10", "--m", "10"],
        &["layer-stats", "--dims", "10,10"],
    ] {
        let out = advlab(args, "1");
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn unwritable_output_exits_with_two() {
    let out = advlab(&["stein-check", "--samples", "100", "--out", "/nonexistent-dir/x.csv"], "1");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"activation": "tanh", "d": [40], "m": [40], "trials": 12, "s0": [1.0]}"#).unwrap();
    let path = cfg.to_str().unwrap();
    let from_file = String::from_utf8(run_ok(&["flip-sweep", "--config", path], "1")).unwrap();
    assert_eq!(from_file.lines().count(), 2);
    assert!(from_file.lines().nth(1).unwrap().starts_with("tanh,40x40x1"));
    let overridden = String::from_utf8(run_ok(&["flip-sweep", "--config", path, "--s0", "1,2", "--d", "30"], "1")).unwrap();
    assert_eq!(overridden.lines().count(), 3);
    assert!(overridden.lines().nth(1).unwrap().starts_with("tanh,30x40x1"));
}

#[test]
fn bad_config_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"trails": 3}"#).unwrap();
    let out = advlab(&["flip-sweep", "--config", cfg.to_str().unwrap()], "1");
    assert_eq!(out.status.code(), Some(1));
    let out = advlab(&["flip-sweep", "--config", "missing.json"], "1");
    assert_eq!(out.status.code(), Some(1));
}
