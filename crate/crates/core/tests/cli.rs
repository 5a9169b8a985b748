//! End-to-end tests of the `probemon` binary: exit codes, file outputs, and
//! determinism of the command-line surface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use probemon::model::ComponentId;
use probemon::monitor::MonitorConfig;
use probemon::simulator::{build_synthetic_model, Campaign, FaultScenario, SyntheticSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_probemon"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn small_spec() -> SyntheticSpec {
    SyntheticSpec {
        n_slats: 4,
        ..SyntheticSpec::default()
    }
}

/// Write a small model, ten fault-free batches, and one faulty batch into
/// `dir`; returns (model, batches, faulty batch) paths.
fn write_fixture(dir: &Path) -> (PathBuf, Vec<PathBuf>, PathBuf) {
    let detector = build_synthetic_model(&small_spec()).expect("valid spec");
    let model_path = dir.join("model.json");
    fs::write(&model_path, detector.model.serialize()).unwrap();

    let mut batch_paths = Vec::new();
    for i in 0..10u64 {
        let batch = detector.generate_events(None, 1000, 100 + i).unwrap();
        let path = dir.join(format!("batch_{i:02}.jsonl"));
        fs::write(&path, batch.to_jsonl()).unwrap();
        batch_paths.push(path);
    }

    let scenario = FaultScenario {
        target: ComponentId::new("pmt_c0001"),
        failure_type: "dead".into(),
        magnitude: 1.0,
        seed: 555,
    };
    let faulty = detector.generate_events(Some(&scenario), 1000, 555).unwrap();
    let faulty_path = dir.join("faulty.jsonl");
    fs::write(&faulty_path, faulty.to_jsonl()).unwrap();

    (model_path, batch_paths, faulty_path)
}

fn build_archive(dir: &Path, model: &Path, batches: &[PathBuf]) -> PathBuf {
    let archive = dir.join("archive.json");
    let mut args = vec![
        "baseline".to_string(),
        model.display().to_string(),
    ];
    args.extend(batches.iter().map(|p| p.display().to_string()));
    args.push("--out".into());
    args.push(archive.display().to_string());
    let out = bin().args(&args).output().unwrap();
    assert_eq!(exit_code(&out), 0, "baseline failed: {:?}", out);
    archive
}

#[test]
fn validate_accepts_good_model_and_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _, _) = write_fixture(dir.path());
    let ok = run(&["validate", model.to_str().unwrap()]);
    assert_eq!(exit_code(&ok), 0);
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("ok:"));

    let bad_path = dir.path().join("broken.json");
    fs::write(&bad_path, "{ not json").unwrap();
    let bad = run(&["validate", bad_path.to_str().unwrap()]);
    assert_eq!(exit_code(&bad), 2);
    assert!(!String::from_utf8_lossy(&bad.stderr).is_empty());

    let missing = run(&["validate", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(exit_code(&missing), 2);
}

#[test]
fn baseline_is_deterministic_and_needs_two_batches() {
    let dir = tempfile::tempdir().unwrap();
    let (model, batches, _) = write_fixture(dir.path());

    let first = build_archive(dir.path(), &model, &batches);
    let bytes_a = fs::read(&first).unwrap();
    fs::remove_file(&first).unwrap();
    let second = build_archive(dir.path(), &model, &batches);
    let bytes_b = fs::read(&second).unwrap();
    assert_eq!(bytes_a, bytes_b, "rebuilt archive differs");

    let one = bin()
        .args([
            "baseline",
            model.to_str().unwrap(),
            batches[0].to_str().unwrap(),
            "--out",
            dir.path().join("one.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&one), 2, "single-batch baseline must fail");

    let no_out = bin()
        .args([
            "baseline",
            model.to_str().unwrap(),
            batches[0].to_str().unwrap(),
            batches[1].to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&no_out), 2, "baseline without --out must fail");
}

#[test]
fn monitor_is_quiet_on_replay_and_flags_faults() {
    let dir = tempfile::tempdir().unwrap();
    let (model, batches, faulty) = write_fixture(dir.path());
    let archive = build_archive(dir.path(), &model, &batches);
    let detector = build_synthetic_model(&small_spec()).unwrap();
    let replay = detector.generate_events(None, 1000, 999).unwrap();
    let replay_path = dir.path().join("replay.jsonl");
    fs::write(&replay_path, replay.to_jsonl()).unwrap();

    let quiet = run(&[
        "monitor",
        model.to_str().unwrap(),
        archive.to_str().unwrap(),
        replay_path.to_str().unwrap(),
        "--alpha",
        "1e-6",
    ]);
    assert_eq!(exit_code(&quiet), 0, "{quiet:?}");
    let verdicts: serde_json::Value = serde_json::from_slice(&quiet.stdout).unwrap();
    assert_eq!(verdicts.as_array().unwrap().len(), 16);

    let loud = run(&[
        "monitor",
        model.to_str().unwrap(),
        archive.to_str().unwrap(),
        faulty.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&loud), 1);
}

#[test]
fn diagnose_exit_codes_and_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let (model, batches, faulty) = write_fixture(dir.path());
    let archive = build_archive(dir.path(), &model, &batches);
    let detector = build_synthetic_model(&small_spec()).unwrap();
    let replay = detector.generate_events(None, 1000, 999).unwrap();
    let replay_path = dir.path().join("replay.jsonl");
    fs::write(&replay_path, replay.to_jsonl()).unwrap();

    let healthy = run(&[
        "diagnose",
        model.to_str().unwrap(),
        archive.to_str().unwrap(),
        replay_path.to_str().unwrap(),
        "--alpha",
        "1e-6",
    ]);
    assert_eq!(exit_code(&healthy), 0, "{healthy:?}");
    let report: serde_json::Value = serde_json::from_slice(&healthy.stdout).unwrap();
    assert_eq!(report["schema"], "diagnosis-report/v1");
    assert!(report["suspects"]["entries"].as_array().unwrap().is_empty());
    assert!(report.get("timestamp").is_none());

    let diagnosed = run(&[
        "diagnose",
        model.to_str().unwrap(),
        archive.to_str().unwrap(),
        faulty.to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&diagnosed),
        1,
        "stderr: {}",
        String::from_utf8_lossy(&diagnosed.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&diagnosed.stdout).unwrap();
    let beliefs = report["beliefs"].as_array().unwrap();
    assert!(!beliefs.is_empty());
    // The injected pmt fault is behaviorally tied with its serial chain;
    // the top hypothesis must sit inside that ambiguity class.
    let top = beliefs[0]["hypothesis"]["component"].as_str().unwrap();
    assert!(
        ["pmt_c0001", "cable_c0001", "splitter_c0001"].contains(&top),
        "unexpected top suspect {top}"
    );

    let missing = run(&[
        "diagnose",
        model.to_str().unwrap(),
        dir.path().join("absent.json").to_str().unwrap(),
        replay_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&missing), 2);
}

#[test]
fn diagnose_table_format_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let (model, batches, faulty) = write_fixture(dir.path());
    let archive = build_archive(dir.path(), &model, &batches);
    let out_path = dir.path().join("report.txt");

    let out = run(&[
        "diagnose",
        model.to_str().unwrap(),
        archive.to_str().unwrap(),
        faulty.to_str().unwrap(),
        "--format",
        "table",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    let table = fs::read_to_string(&out_path).unwrap();
    assert!(table.contains("BAD"), "table should list BAD probes: {table}");
}

#[test]
fn env_variables_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let (model, batches, _) = write_fixture(dir.path());
    let archive = build_archive(dir.path(), &model, &batches);
    let detector = build_synthetic_model(&small_spec()).unwrap();
    let replay = detector.generate_events(None, 1000, 999).unwrap();
    let replay_path = dir.path().join("replay.jsonl");
    fs::write(&replay_path, replay.to_jsonl()).unwrap();

    let out = bin()
        .env("PROBEMON_ALPHA", "1e-6")
        .args([
            "monitor",
            model.to_str().unwrap(),
            archive.to_str().unwrap(),
            replay_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "{out:?}");
}

#[test]
fn simulate_writes_reports_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = Campaign {
        spec: small_spec(),
        config: MonitorConfig::default(),
        baseline_seed: 9,
        scenarios: vec![
            FaultScenario {
                target: ComponentId::new("pmt_c0002"),
                failure_type: "gain_drop".into(),
                magnitude: 6.0,
                seed: 1,
            },
            FaultScenario {
                target: ComponentId::new("adc_b000"),
                failure_type: "stuck".into(),
                magnitude: 6.0,
                seed: 2,
            },
        ],
    };
    let campaign_path = dir.path().join("campaign.json");
    fs::write(&campaign_path, serde_json::to_string_pretty(&campaign).unwrap()).unwrap();

    let run_once = |out_dir: &Path| {
        let out = run(&[
            "simulate",
            campaign_path.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "{out:?}");
    };
    let dir_a = dir.path().join("a");
    let dir_b = dir.path().join("b");
    run_once(&dir_a);
    run_once(&dir_b);

    for name in ["trial_0000.json", "trial_0001.json", "aggregate.json"] {
        let a = fs::read(dir_a.join(name)).unwrap();
        let b = fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
    let aggregate: serde_json::Value =
        serde_json::from_slice(&fs::read(dir_a.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(aggregate["trials"], 2);
    assert_eq!(aggregate["alerted_trials"], 2);

    let empty = Campaign {
        scenarios: Vec::new(),
        ..campaign
    };
    let empty_path = dir.path().join("empty.json");
    fs::write(&empty_path, serde_json::to_string_pretty(&empty).unwrap()).unwrap();
    let out = run(&[
        "simulate",
        empty_path.to_str().unwrap(),
        "--out-dir",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);

    let invalid_path = dir.path().join("invalid.json");
    fs::write(&invalid_path, "{\"nope\": 1}").unwrap();
    let out = run(&[
        "simulate",
        invalid_path.to_str().unwrap(),
        "--out-dir",
        dir.path().join("d").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
}
