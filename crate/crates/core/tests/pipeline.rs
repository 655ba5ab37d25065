use sarcd::pipeline::{detection_records, run_pipeline, PipelineConfig};
use sarcd::synth::{render_frame, SceneSpec};
use sarcd::Frame;

fn scene(rate: f64, frames: usize) -> SceneSpec {
    SceneSpec::from_json(&format!(
        r#"{{"width": 256, "height": 256, "frame_count": {frames}, "rotation_rate": {rate},
            "background": {{"texture_seed": 12, "mean": 180, "amplitude": 40, "cell_size": 10}},
            "static_objects": [
                {{"shape": "rect", "position": [70, 70], "size": [10, 8], "intensity": 40}},
                {{"shape": "disk", "position": [180, 80], "size": [9, 9], "intensity": 30}},
                {{"shape": "rect", "position": [90, 190], "size": [7, 12], "intensity": 50}},
                {{"shape": "disk", "position": [170, 170], "size": [12, 12], "intensity": 60}},
                {{"shape": "rect", "position": [128, 40], "size": [8, 8], "intensity": 20}}
            ],
            "speckle_looks": "none", "rng_seed": 5}}"#
    ))
    .unwrap()
}

fn frames(spec: &SceneSpec) -> Vec<Frame> {
    (0..spec.frame_count).map(|t| render_frame(spec, t).unwrap().0).collect()
}

/// Corner-rich scene: registration needs many features to beat the
/// integer-pixel keypoint quantization.
fn cluttered(rate: f64, frames: usize) -> SceneSpec {
    let objects: Vec<String> = (0..36)
        .map(|i| {
            let (gx, gy) = (i % 6, i / 6);
            let shape = if (gx + gy) % 2 == 0 { "rect" } else { "disk" };
            let size = 6 + (i * 7) % 9;
            format!(
                r#"{{"shape": "{shape}", "position": [{}, {}], "size": [{size}, {}], "intensity": {}}}"#,
                48 + gx * 32 + (i * 5) % 9,
                48 + gy * 32 + (i * 3) % 7,
                size + (i % 3) * 2,
                20 + (i * 37) % 90
            )
        })
        .collect();
    SceneSpec::from_json(&format!(
        r#"{{"width": 256, "height": 256, "frame_count": {frames}, "rotation_rate": {rate},
            "background": {{"texture_seed": 5, "mean": 170, "amplitude": 50, "cell_size": 10}},
            "static_objects": [{}], "speckle_looks": "none", "rng_seed": 1}}"#,
        objects.join(",")
    ))
    .unwrap()
}

#[test]
fn registration_residual_is_small() {
    let spec = cluttered(1.0, 8);
    let mut config = PipelineConfig::default();
    config.registration.enabled = true;
    let outputs = run_pipeline(&frames(&spec), &config).unwrap();
    assert_eq!(outputs.len(), spec.frame_count - 1);
    for out in &outputs {
        let t = out.registration.expect("registration ran");
        let residual = (t.angle.to_degrees() - spec.rotation_rate).abs();
        assert!(residual <= 0.1, "frame {}: residual {residual}°", out.frame_index);
        assert!(out.warnings.is_empty());
    }
}

#[test]
fn reruns_are_identical() {
    let spec = scene(0.3, 5);
    let f = frames(&spec);
    let config = PipelineConfig::default();
    let a = run_pipeline(&f, &config).unwrap();
    let b = run_pipeline(&f, &config).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.frame_index, y.frame_index);
        assert_eq!(detection_records(&x.detections), detection_records(&y.detections));
        assert_eq!(x.blobs, y.blobs);
        assert_eq!(x.tracked, y.tracked);
    }
}

#[test]
fn static_objects_are_blobs_but_not_detections() {
    let spec = scene(0.3, 6);
    let outputs = run_pipeline(&frames(&spec), &PipelineConfig::default()).unwrap();
    for out in &outputs {
        assert!(!out.blobs.is_empty());
        assert!(out.detections.is_empty(), "frame {}", out.frame_index);
    }
}
