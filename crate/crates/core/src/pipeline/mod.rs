//! Orchestration: enhancement, optional registration, Phase 1 flow, Phase 2
//! blobs and Phase 3 fusion over a frame sequence, plus file plumbing.

pub mod annotate;
pub mod config;
pub mod eval;
pub mod io;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blob::{detect_blobs, Blob};
use crate::error::{Error, Result};
use crate::flow::{process_frame_flow, FlowState, TrackedPoint};
use crate::fusion::{fuse, recenter_tracked, Detection};
use crate::imgproc::{adjust_contrast, binarize, gaussian_blur, otsu_threshold, unsharp_mask, Frame};
use crate::registration::{register_pair, warp_frame, RigidTransform};

pub use annotate::annotate;
pub use config::{BlobInputConfig, EnhancementConfig, FusionConfig, OutputConfig, PipelineConfig};
pub use eval::{evaluate, evaluate_from, EvalReport, FrameEval};
pub use io::{load_frames, read_frame, write_frame, FrameReader};

/// Everything computed for one frame pair `(index - 1, index)`.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub frame_index: usize,
    pub detections: Vec<Detection>,
    pub blobs: Vec<Blob>,
    pub tracked: Vec<TrackedPoint>,
    /// Estimated prev -> cur motion when registration is enabled and succeeded.
    pub registration: Option<RigidTransform>,
    /// Non-fatal problems, e.g. a skipped binarization.
    pub warnings: Vec<String>,
}

/// Frame handed to Phase 1: optional denoise, unsharp mask, optional Otsu
/// binarization. A constant frame cannot be binarized; that step is then
/// skipped with a warning.
pub fn enhance_for_flow(frame: &Frame, config: &EnhancementConfig, warnings: &mut Vec<String>) -> Result<Frame> {
    let base = if config.denoise_sigma > 0.0 {
        gaussian_blur(frame, config.denoise_sigma)?
    } else {
        frame.clone()
    };
    let sharp = unsharp_mask(&base, config.sigma, config.contrast_gain)?;
    if !config.binarize_for_flow {
        return Ok(sharp);
    }
    match otsu_threshold(&sharp) {
        Ok(t) => binarize(&sharp, t as f64)?.to_frame(),
        Err(Error::Degenerate(msg)) => {
            warnings.push(format!("binarization skipped: {msg}"));
            Ok(sharp)
        }
        Err(e) => Err(e),
    }
}

/// Frame handed to Phase 2 (which equalizes it internally).
pub fn prepare_blob_input(frame: &Frame, config: &BlobInputConfig) -> Result<Frame> {
    let smoothed = if config.smoothing_sigma > 0.0 {
        gaussian_blur(frame, config.smoothing_sigma)?
    } else {
        frame.clone()
    };
    if config.contrast_gain > 1.0 {
        adjust_contrast(&smoothed, config.contrast_gain)
    } else {
        Ok(smoothed)
    }
}

/// Streaming detector. Holds only the previous enhanced frame and the
/// Phase 1 state between calls.
pub struct Pipeline {
    config: PipelineConfig,
    state: FlowState,
    prev: Option<Frame>,
    next_index: usize,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline {
            config,
            state: FlowState::new(),
            prev: None,
            next_index: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn flow_state(&self) -> &FlowState {
        &self.state
    }

    /// Feeds the next frame. Returns `None` for the first frame, which has
    /// no predecessor.
    pub fn push(&mut self, frame: &Frame) -> Result<Option<FrameOutput>> {
        let index = self.next_index;
        let out = self.step(index, frame).map_err(|e| e.at_frame(index))?;
        self.next_index += 1;
        Ok(out)
    }

    fn step(&mut self, index: usize, frame: &Frame) -> Result<Option<FrameOutput>> {
        let mut warnings = Vec::new();
        if let Some(prev) = &self.prev {
            if (prev.width(), prev.height()) != (frame.width(), frame.height()) {
                return Err(Error::input(format!(
                    "frame is {}x{}, sequence is {}x{}",
                    frame.width(),
                    frame.height(),
                    prev.width(),
                    prev.height()
                )));
            }
        }
        let cur = enhance_for_flow(frame, &self.config.enhancement, &mut warnings)?;
        let Some(prev) = self.prev.take() else {
            self.prev = Some(cur);
            return Ok(None);
        };

        let mut registration = None;
        let tracked = if self.config.registration.enabled {
            match register_pair(&prev, &cur, &self.config.registration) {
                Ok(t) => {
                    registration = Some(t);
                    // Resample cur into prev's coordinates: out(p) = cur(T p).
                    let aligned = warp_frame(&cur, &t.inverse());
                    process_frame_flow(&mut self.state, &prev, &aligned, &self.config.flow)?
                }
                Err(Error::Degenerate(msg)) => {
                    warnings.push(format!("registration skipped: {msg}"));
                    process_frame_flow(&mut self.state, &prev, &cur, &self.config.flow)?
                }
                Err(e) => return Err(e),
            }
        } else {
            process_frame_flow(&mut self.state, &prev, &cur, &self.config.flow)?
        };
        drop(prev);
        self.prev = Some(cur);

        let blob_input = prepare_blob_input(frame, &self.config.blob_input)?;
        let blobs = detect_blobs(&blob_input, &self.config.blob)?;
        drop(blob_input);
        let detections = fuse(index, &tracked, &blobs);
        if self.config.fusion.recenter_tracked {
            recenter_tracked(&mut self.state.tracked, &blobs);
        }
        Ok(Some(FrameOutput {
            frame_index: index,
            detections,
            blobs,
            tracked,
            registration,
            warnings,
        }))
    }
}

/// Runs the detector over an in-memory sequence; one output per frame
/// index >= 1.
pub fn run_pipeline(frames: &[Frame], config: &PipelineConfig) -> Result<Vec<FrameOutput>> {
    if frames.len() < 2 {
        return Err(Error::input(format!("need at least 2 frames, got {}", frames.len())));
    }
    let mut pipeline = Pipeline::new(config.clone())?;
    let mut outputs = Vec::with_capacity(frames.len() - 1);
    for frame in frames {
        if let Some(out) = pipeline.push(frame)? {
            outputs.push(out);
        }
    }
    Ok(outputs)
}

/// One line of `detections.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub blob_area: usize,
    pub circularity: f64,
    pub motion_mag: f64,
    pub motion_angle_deg: f64,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        DetectionRecord {
            frame: d.frame_index,
            x: d.position.x,
            y: d.position.y,
            blob_area: d.blob.area,
            circularity: d.blob.circularity,
            motion_mag: d.motion_magnitude,
            motion_angle_deg: d.motion_angle.to_degrees(),
        }
    }
}

/// Records of one frame, sorted by `(x, y)`.
pub fn detection_records(detections: &[Detection]) -> Vec<DetectionRecord> {
    let mut records: Vec<DetectionRecord> = detections.iter().map(DetectionRecord::from).collect();
    records.sort_by(|a, b| a.frame.cmp(&b.frame).then(a.x.total_cmp(&b.x)).then(a.y.total_cmp(&b.y)));
    records
}

pub fn write_detection_records(out: &mut impl Write, records: &[DetectionRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::input(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

/// Totals from [`detect_directory`].
#[derive(Debug, Clone, Default)]
pub struct DetectSummary {
    pub frames: usize,
    pub detections: usize,
    pub detections_path: PathBuf,
    pub warnings: Vec<String>,
}

/// Name of an annotated frame file.
pub fn annotated_file_name(index: usize) -> String {
    format!("annotated_{index:06}.pgm")
}

/// Streams every frame of `input` through the detector, writing
/// `detections.jsonl` (and annotated frames when `annotate` is set) into
/// `output`. At most the raw current frame, the previous enhanced frame and
/// one annotated frame are alive at once, besides per-pair scratch buffers.
pub fn detect_directory(input: &Path, config: &PipelineConfig, output: &Path, annotate_frames: bool) -> Result<DetectSummary> {
    let reader = FrameReader::open(input)?;
    let mut pipeline = Pipeline::new(config.clone())?;
    fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    let detections_path = output.join("detections.jsonl");
    let file = fs::File::create(&detections_path).map_err(|e| Error::io(&detections_path, e))?;
    let mut out = BufWriter::new(file);
    let annotate_frames = annotate_frames || config.output.emit_annotated;
    let mut summary = DetectSummary {
        detections_path: detections_path.clone(),
        ..DetectSummary::default()
    };
    for item in reader {
        let (_, frame) = item?;
        summary.frames += 1;
        let Some(result) = pipeline.push(&frame)? else {
            continue;
        };
        summary
            .warnings
            .extend(result.warnings.iter().map(|w| format!("frame {}: {w}", result.frame_index)));
        let records = detection_records(&result.detections);
        summary.detections += records.len();
        write_detection_records(&mut out, &records).map_err(|e| Error::io(&detections_path, e))?;
        if annotate_frames {
            let points: Vec<_> = result.tracked.iter().map(|t| t.position).collect();
            let marks: Vec<_> = result.detections.iter().map(|d| d.position).collect();
            let annotated = annotate(&frame, &marks, &result.blobs, &points);
            io::write_pgm(&output.join(annotated_file_name(result.frame_index)), &annotated)?;
        }
    }
    out.flush().map_err(|e| Error::io(&detections_path, e))?;
    Ok(summary)
}
