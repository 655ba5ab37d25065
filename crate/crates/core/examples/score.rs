//! Renders a scene in memory, runs the detector and prints the evaluation.
//!
//! `cargo run --release --example score -- <scene.json> [config.json] [radius] [frames]`

use std::path::Path;

use sarcd::pipeline::{detection_records, evaluate_from, Pipeline, PipelineConfig};
use sarcd::synth::{render_frame, FrameTruth, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut spec = SceneSpec::load(Path::new(args.first().ok_or("usage: score <scene.json> [config.json] [radius] [frames]")?))?;
    if let Some(n) = args.get(3) {
        spec.frame_count = n.parse()?;
    }
    let config = match args.get(1) {
        Some(p) => PipelineConfig::load(Path::new(p))?,
        None => PipelineConfig::default(),
    };
    let radius: f64 = args.get(2).map(|r| r.parse()).transpose()?.unwrap_or(10.0);
    let mut pipeline = Pipeline::new(config)?;
    let (mut records, mut truth) = (Vec::new(), Vec::new());
    let (mut blobs, mut tracked) = (0, 0);
    for t in 0..spec.frame_count {
        let (frame, targets) = render_frame(&spec, t)?;
        truth.push(FrameTruth { frame: t, targets });
        if let Some(out) = pipeline.push(&frame)? {
            blobs += out.blobs.len();
            tracked += out.tracked.len();
            records.extend(detection_records(&out.detections));
        }
    }
    let report = evaluate_from(&records, &truth, radius, 1)?;
    let frames = (spec.frame_count - 1) as f64;
    println!(
        "tp {} fp {} fn {} precision {:.3} recall {:.3} | blobs/frame {:.1} tracked/frame {:.1}",
        report.true_positives,
        report.false_positives,
        report.false_negatives,
        report.precision,
        report.recall,
        blobs as f64 / frames,
        tracked as f64 / frames
    );
    Ok(())
}
