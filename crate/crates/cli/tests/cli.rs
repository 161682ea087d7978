use std::path::Path;
use std::process::{Command, Output};

fn asg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asg"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn asg")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const TINY: &str = r#"{
  "manifest": "data/pretrain.json",
  "batch_size": 8,
  "epochs": 2,
  "warmup_epochs": 1,
  "segment_frames": 32,
  "front_end": {"kind": "mel", "n_mels": 32, "f_min": 50.0, "f_max": 8000.0},
  "adversarial": {"enabled": ["FT", "FF", "SF", "ST"], "min_scroll": 8},
  "encoder": {"channels": [4, 8]},
  "projection": {"hidden_dim": 32, "output_dim": 16}
}"#;

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&asg(&["--help"], dir.path())), 0);
    assert_eq!(code(&asg(&["--version"], dir.path())), 0);
    assert_eq!(code(&asg(&[], dir.path())), 1);
    assert_eq!(code(&asg(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&asg(&["pretrain", "--out", "x"], dir.path())), 1);
    assert_eq!(code(&asg(&["pretrain", "--config", "missing.json", "--out", "x"], dir.path())), 1);
    assert_eq!(code(&asg(&["synth", "--spec", "noise", "--out", "x"], dir.path())), 1);
}

#[test]
fn invalid_config_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"manifest": "m.json", "batch_size": 0}"#).unwrap();
    std::fs::write(dir.path().join("unknown.json"), r#"{"manifest": "m.json", "learning_rate": 1}"#).unwrap();
    for cfg in ["bad.json", "unknown.json"] {
        let out = asg(&["pretrain", "--config", cfg, "--out", "run"], dir.path());
        assert_eq!(code(&out), 1, "{cfg}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn self_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = asg(&["loss-oracle", "--n", "4", "--trials", "100"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("max relative error"));
    assert_eq!(code(&asg(&["grad-check", "--precision", "double"], dir.path())), 0);
    assert_eq!(code(&asg(&["grad-check", "--precision", "single"], dir.path())), 0);
    // an impossible tolerance is a runtime failure
    assert_eq!(code(&asg(&["grad-check", "--precision", "double", "--tolerance", "0"], dir.path())), 2);
}

#[test]
fn synth_pretrain_probe_augment_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let out = asg(
        &["synth", "--spec", "tone", "--out", "data", "--clips-per-class", "10", "--duration", "1"],
        root,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("data/dataset.json").is_file());

    std::fs::write(root.join("tiny.json"), TINY).unwrap();
    let out = asg(&["pretrain", "--config", "tiny.json", "--out", "run", "--deterministic"], root);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["run/config.json", "run/metrics.jsonl", "run/checkpoints/epoch-001.asgc", "run/checkpoints/epoch-002.asgc"] {
        assert!(root.join(f).is_file(), "{f}");
    }

    std::fs::write(root.join("probe.json"), r#"{"epochs": 4, "lr": 0.05}"#).unwrap();
    let out = asg(
        &[
            "probe",
            "--checkpoint",
            "run/checkpoints/epoch-002.asgc",
            "--dataset",
            "data/dataset.json",
            "--config",
            "probe.json",
            "--out",
            "eval/metrics.json",
        ],
        root,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(root.join("eval/metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["task"], "tone-class");
    assert_eq!(metrics["mode"], "frozen");
    let top1 = metrics["top1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&top1));
    assert_eq!(metrics["per_epoch"].as_array().unwrap().len(), 4);

    let missing = asg(
        &["probe", "--checkpoint", "nope.asgc", "--dataset", "data/dataset.json", "--out", "m.json"],
        root,
    );
    assert_eq!(code(&missing), 1);

    let out = asg(&["augment", "--config", "tiny.json", "--out", "aug", "--count", "3"], root);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(root.join("aug/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.len(), 12);
    for rec in &manifest {
        assert!(root.join("aug").join(rec["file"].as_str().unwrap()).is_file());
        match rec["view"].as_str().unwrap() {
            "x" => assert!(rec["transform"].is_null()),
            "x_p" => assert_eq!(rec["transform"], "positive"),
            _ => {
                let tag = rec["transform"].as_str().unwrap();
                assert!(["FT", "FF", "SF", "ST"].contains(&tag));
                assert_eq!(rec["shift"].is_null(), tag.starts_with('F'));
            }
        }
    }
    // same seed, same views
    let again = asg(&["augment", "--config", "tiny.json", "--out", "aug2", "--count", "3"], root);
    assert_eq!(code(&again), 0);
    assert_eq!(
        std::fs::read(root.join("aug/00001_x_n.asgs")).unwrap(),
        std::fs::read(root.join("aug2/00001_x_n.asgs")).unwrap()
    );

    let out = asg(
        &["dump-spectrogram", "--input", "data/clips/c0_0000.wav", "--out", "spec.asgs", "--config", "tiny.json"],
        root,
    );
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("32x100 "));
}

#[test]
fn shipped_desk_config_matches_the_builtin_preset() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.json");
    let cfg: asg_core::train::TrainConfig = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(cfg, asg_core::train::TrainConfig::desk("../data/pretrain.json"));
}
