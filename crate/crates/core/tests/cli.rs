use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sarcd::pipeline::io::write_pgm;
use sarcd::pipeline::{EvalReport, PipelineConfig};
use sarcd::synth::{generate_sequence, read_ground_truth, SceneSpec};
use sarcd::Frame;

fn sarcd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sarcd")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_input_is_a_usage_error() {
    let out = sarcd(&["detect", "--output", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--input"));
    assert_eq!(sarcd(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn default_config_round_trips() {
    let out = sarcd(&["detect", "--print-default-config"]);
    assert_eq!(out.status.code(), Some(0));
    let config = PipelineConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(config, PipelineConfig::default());
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = sarcd(&["detect", "--input", s(&missing), "--output", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());

    let frames = dir.path().join("frames");
    fs::create_dir(&frames).unwrap();
    for i in 0..2 {
        write_pgm(&frames.join(format!("f{i}.pgm")), &Frame::filled(64, 64, 100.0).unwrap()).unwrap();
    }
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"flow": {"kone": 1}}"#).unwrap();
    let out = sarcd(&["detect", "--input", s(&frames), "--config", s(&config), "--output", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kone"));
}

#[test]
fn processing_errors_exit_3() {
    // Too small for the default grid margin.
    let dir = tempfile::tempdir().unwrap();
    for i in 0..2 {
        write_pgm(&dir.path().join(format!("f{i}.pgm")), &Frame::filled(32, 32, 100.0).unwrap()).unwrap();
    }
    let out = sarcd(&["detect", "--input", s(dir.path()), "--output", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
}

const SCENE: &str = r#"{
  "width": 128, "height": 128, "frame_count": 5, "rotation_rate": 0.2,
  "background": {"texture_seed": 3, "mean": 190, "amplitude": 20},
  "targets": [{"id": 1, "shape": "rect", "size": [6, 6], "intensity": 30,
               "trajectory": {"start": [50, 60], "velocity": [2, 0]}}],
  "speckle_looks": "none", "rng_seed": 1
}"#;

#[test]
fn perfect_detections_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let seq = generate_sequence(&SceneSpec::from_json(SCENE).unwrap(), dir.path()).unwrap();
    let truth = read_ground_truth(&seq.ground_truth).unwrap();
    let mut lines = String::new();
    for ft in &truth {
        for t in &ft.targets {
            lines += &format!(
                "{{\"frame\": {}, \"x\": {}, \"y\": {}, \"blob_area\": 36, \"circularity\": 1.1, \"motion_mag\": 2.0, \"motion_angle_deg\": 0.0}}\n",
                ft.frame, t.x, t.y
            );
        }
    }
    let dets = dir.path().join("perfect.jsonl");
    fs::write(&dets, lines).unwrap();
    let out = sarcd(&["eval", "--detections", s(&dets), "--truth", s(&seq.ground_truth), "--radius", "10", "--first-frame", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let report: EvalReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((report.precision, report.recall), (1.0, 1.0));
    assert_eq!(report.true_positives, 5);
}

#[test]
fn synth_detect_annotate_round() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scene.json");
    fs::write(&spec, SCENE).unwrap();
    let frames = dir.path().join("frames");
    let out = dir.path().join("out");
    assert_eq!(sarcd(&["synth", "--spec", s(&spec), "--output", s(&frames)]).status.code(), Some(0));
    let detect = sarcd(&["detect", "--input", s(&frames), "--output", s(&out), "--annotate"]);
    assert_eq!(detect.status.code(), Some(0), "{}", String::from_utf8_lossy(&detect.stderr));
    assert!(detect.stdout.is_empty());
    assert!(out.join("detections.jsonl").exists());
    assert!(out.join("annotated_000004.pgm").exists());

    let marked = dir.path().join("marked");
    let ann = sarcd(&["annotate", "--input", s(&frames), "--detections", s(&out.join("detections.jsonl")), "--output", s(&marked)]);
    assert_eq!(ann.status.code(), Some(0));
    assert_eq!(fs::read_dir(&marked).unwrap().count(), 5);
}
