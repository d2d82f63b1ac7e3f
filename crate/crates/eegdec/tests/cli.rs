//! End-user behavior of the command-line interface: exit codes, messages,
//! and file plumbing on a small synthetic dataset.

use std::process::{Command, Output};

use eegdec::synth::GeneratorConfig;

fn eegdec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eegdec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: String,
}

/// 16-channel, 3-trials-per-class dataset plus epochs at <root>/ep.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap().to_string();
    let mut cfg = GeneratorConfig::default_with_seed(4);
    cfg.n_channels = 16;
    cfg.n_trials_per_class = 3;
    let cfg_path = format!("{root}/cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = eegdec(&["synth", "--config", &cfg_path, "--out", &format!("{root}/rec")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = eegdec(&[
        "preprocess", "--in", &format!("{root}/rec"), "--out", &format!("{root}/ep"),
        "--decim", "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    Fixture { _dir: dir, root }
}

#[test]
fn synth_missing_config_exits_2_with_path() {
    let out = eegdec(&["synth", "--config", "/nonexistent/cfg.json", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("config not found: /nonexistent/cfg.json"));
}

#[test]
fn synth_seed_override_lands_in_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap().to_string();
    let mut cfg = GeneratorConfig::default_with_seed(4);
    cfg.n_channels = 8;
    cfg.n_trials_per_class = 1;
    let cfg_path = format!("{root}/cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = eegdec(&[
        "synth", "--config", &cfg_path, "--out", &format!("{root}/rec"), "--seed", "77",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let truth = std::fs::read_to_string(format!("{root}/rec.truth.json")).unwrap();
    assert!(truth.contains("\"seed\": 77"));
}

#[test]
fn preprocess_rejects_band_beyond_nyquist() {
    let f = fixture();
    let out = eegdec(&[
        "preprocess", "--in", &format!("{}/rec", f.root), "--out", &format!("{}/bad", f.root),
        "--band", "1:200", "--decim", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!stderr(&out).is_empty());
}

#[test]
fn preprocess_reports_epoch_count_and_length() {
    let f = fixture();
    let text = std::fs::read_to_string(format!("{}/ep.epochs.json", f.root)).unwrap();
    assert!(text.contains("\"n_trials\": 12"));
    let out = eegdec(&[
        "preprocess", "--in", &format!("{}/rec", f.root), "--out", &format!("{}/ep2", f.root),
        "--decim", "1",
    ]);
    let s = stdout(&out);
    assert!(s.contains("kept 12 epochs of 1000 samples"), "{s}");
}

#[test]
fn evaluate_rejects_more_folds_than_class_trials() {
    let f = fixture();
    let out = eegdec(&[
        "evaluate", "--epochs", &format!("{}/ep", f.root), "--folds", "7",
        "--report", &format!("{}/r.json", f.root),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn evaluate_prints_table_style_accuracy() {
    let f = fixture();
    let out = eegdec(&[
        "evaluate", "--epochs", &format!("{}/ep", f.root), "--folds", "3", "--reps", "2",
        "--report", &format!("{}/r.json", f.root),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout(&out);
    assert!(s.contains("accuracy: ") && s.contains("(±") && s.contains(")%"), "{s}");
    assert!(std::fs::metadata(format!("{}/r.json", f.root)).is_ok());
}

#[test]
fn ersp_unknown_channel_exits_2_listing_labels() {
    let f = fixture();
    let out = eegdec(&[
        "ersp", "--epochs", &format!("{}/ep", f.root), "--baseline", "0:1000",
        "--channel", "Qz", "--out", &format!("{}/e.csv", f.root),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let e = stderr(&out);
    assert!(e.contains("Qz") && e.contains("Fp1"), "{e}");
}

#[test]
fn topomap_malformed_window_exits_2() {
    let f = fixture();
    let out = eegdec(&[
        "topomap", "--epochs", &format!("{}/ep", f.root), "--windows", "500-1500",
        "--out", &format!("{}/t.csv", f.root),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("LO:HI"));
}

#[test]
fn topomap_row_count_matches_windows_times_channels() {
    let f = fixture();
    let out = eegdec(&[
        "topomap", "--epochs", &format!("{}/ep", f.root),
        "--windows", "500:1500,1500:2500,2500:3500,3500:4500",
        "--out", &format!("{}/t.csv", f.root),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(format!("{}/t.csv", f.root)).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 16);
}
