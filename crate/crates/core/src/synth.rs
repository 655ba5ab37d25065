//! Synthetic circular-SAR-like video with ground truth.
//!
//! A scene is composed in scene coordinates (value-noise background, static
//! shapes, linearly moving targets), the whole scene is rotated about the
//! frame center by `t * rotation_rate`, and multiplicative gamma speckle is
//! applied. Target centers are pushed through the same rotation to give the
//! per-frame ground truth.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotate_about, Point};
use crate::imgproc::{clamp_intensity, sample_bilinear, Frame};
use crate::pipeline::io::write_pgm;

/// Value-noise background parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    pub texture_seed: u64,
    pub mean: f64,
    pub amplitude: f64,
    /// Lattice spacing of the coarse noise octave, pixels.
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
}

fn default_cell_size() -> f64 {
    16.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Axis-aligned rectangle in scene coordinates.
    Rect,
    /// Ellipse inscribed in the `size` box (a disk when square).
    Disk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticObject {
    pub shape: Shape,
    /// Center in scene coordinates.
    pub position: [f64; 2],
    /// Width and height in pixels.
    pub size: [f64; 2],
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub start: [f64; 2],
    /// Pixels per frame, scene coordinates.
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingTarget {
    pub id: u32,
    pub shape: Shape,
    pub size: [f64; 2],
    pub intensity: f64,
    pub trajectory: Trajectory,
}

impl MovingTarget {
    /// Scene-coordinate center at frame `t`.
    pub fn center_at(&self, t: usize) -> Point {
        let t = t as f64;
        Point::new(
            self.trajectory.start[0] + t * self.trajectory.velocity[0],
            self.trajectory.start[1] + t * self.trajectory.velocity[1],
        )
    }

    pub fn speed(&self) -> f64 {
        self.trajectory.velocity[0].hypot(self.trajectory.velocity[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeckleOff {
    None,
}

/// Number of looks `L`, or `"none"` for a clean sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpeckleLooks {
    Looks(f64),
    Off(SpeckleOff),
}

impl SpeckleLooks {
    pub fn looks(&self) -> Option<f64> {
        match self {
            SpeckleLooks::Looks(l) => Some(*l),
            SpeckleLooks::Off(_) => None,
        }
    }
}

/// Description of a synthetic sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    /// Degrees per frame about the frame center.
    pub rotation_rate: f64,
    pub background: Background,
    #[serde(default)]
    pub static_objects: Vec<StaticObject>,
    #[serde(default)]
    pub targets: Vec<MovingTarget>,
    pub speckle_looks: SpeckleLooks,
    pub rng_seed: u64,
}

/// One target's true position in a rendered frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

impl TargetTruth {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Ground-truth record for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub frame: usize,
    pub targets: Vec<TargetTruth>,
}

fn within(center: [f64; 2], size: [f64; 2], w: usize, h: usize) -> bool {
    let (hx, hy) = (size[0] / 2.0, size[1] / 2.0);
    center[0] - hx >= 0.0 && center[1] - hy >= 0.0 && center[0] + hx <= w as f64 && center[1] + hy <= h as f64
}

fn check_intensity(v: f64, what: &str) -> Result<()> {
    if !(0.0..=255.0).contains(&v) {
        return Err(Error::param(format!("{what} intensity {v} outside [0, 255]")));
    }
    Ok(())
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<SceneSpec> {
        let spec: SceneSpec = serde_json::from_str(text).map_err(|e| Error::input(format!("scene spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<SceneSpec> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SceneSpec::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < crate::imgproc::MIN_FRAME_SIDE || self.height < crate::imgproc::MIN_FRAME_SIDE {
            return Err(Error::param("scene must be at least 16x16"));
        }
        if self.frame_count == 0 {
            return Err(Error::param("frame_count must be positive"));
        }
        if !self.rotation_rate.is_finite() {
            return Err(Error::param("rotation_rate must be finite"));
        }
        let bg = &self.background;
        if !(bg.cell_size.is_finite() && bg.cell_size >= 1.0) {
            return Err(Error::param("background.cell_size must be >= 1"));
        }
        if !(bg.amplitude.is_finite() && bg.amplitude >= 0.0) {
            return Err(Error::param("background.amplitude must be non-negative"));
        }
        check_intensity(bg.mean, "background")?;
        if let Some(l) = self.speckle_looks.looks() {
            if !(l.is_finite() && l >= 1.0) {
                return Err(Error::param(format!("speckle_looks must be >= 1, got {l}")));
            }
        }
        for (i, o) in self.static_objects.iter().enumerate() {
            check_intensity(o.intensity, "static object")?;
            if !(o.size[0] > 0.0 && o.size[1] > 0.0) {
                return Err(Error::param(format!("static object {i} has non-positive size")));
            }
            if !within(o.position, o.size, self.width, self.height) {
                return Err(Error::param(format!("static object {i} extends outside the scene")));
            }
        }
        let last = self.frame_count - 1;
        for t in &self.targets {
            check_intensity(t.intensity, "target")?;
            if !(t.size[0] > 0.0 && t.size[1] > 0.0) {
                return Err(Error::param(format!("target {} has non-positive size", t.id)));
            }
            for frame in [0, last] {
                let c = t.center_at(frame);
                if !within([c.x, c.y], t.size, self.width, self.height) {
                    return Err(Error::param(format!("target {} leaves the scene by frame {frame}", t.id)));
                }
            }
        }
        Ok(())
    }

    /// Non-fatal issues, e.g. targets faster than half the grid spacing.
    pub fn warnings(&self, grid_spacing: usize) -> Vec<String> {
        let limit = grid_spacing as f64 / 2.0;
        self.targets
            .iter()
            .filter(|t| t.speed() > limit)
            .map(|t| format!("target {} moves {:.2} px/frame, more than d/2 = {limit}", t.id, t.speed()))
            .collect()
    }

    pub fn center(&self) -> Point {
        Point::new((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    /// Rotation of frame `t`, radians.
    pub fn rotation_at(&self, t: usize) -> f64 {
        (t as f64 * self.rotation_rate).to_radians()
    }

    /// Ground-truth target centers of frame `t` (targets rotated out of the
    /// frame are omitted).
    pub fn truth_at(&self, t: usize) -> Vec<TargetTruth> {
        let angle = self.rotation_at(t);
        let c = self.center();
        self.targets
            .iter()
            .filter_map(|tg| {
                let p = rotate_about(tg.center_at(t), c, angle);
                let inside = p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width - 1) as f64 && p.y <= (self.height - 1) as f64;
                inside.then_some(TargetTruth { id: tg.id, x: p.x, y: p.y })
            })
            .collect()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lattice value in [-1, 1] for integer cell `(i, j)`.
fn lattice(seed: u64, i: i64, j: i64) -> f64 {
    let h = splitmix(seed ^ splitmix((i as u64).wrapping_mul(0x1F1F_1F1F) ^ splitmix(j as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn value_noise_octave(seed: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (i, j) = (fx as i64, fy as i64);
    let (tx, ty) = (smoothstep(x - fx), smoothstep(y - fy));
    let a = lattice(seed, i, j);
    let b = lattice(seed, i + 1, j);
    let c = lattice(seed, i, j + 1);
    let d = lattice(seed, i + 1, j + 1);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

/// Two-octave value noise in [-1, 1] at scene position `(x, y)`.
pub fn value_noise(seed: u64, cell_size: f64, x: f64, y: f64) -> f64 {
    let coarse = value_noise_octave(seed, x / cell_size, y / cell_size);
    let fine = value_noise_octave(seed.wrapping_add(0x0DDB_1A5E), 2.0 * x / cell_size, 2.0 * y / cell_size);
    (2.0 * coarse + fine) / 3.0
}

/// A `width x height` frame of value noise, `mean + amplitude * noise`,
/// sampled at `(x, y) + offset`.
pub fn value_noise_frame(width: usize, height: usize, seed: u64, mean: f64, amplitude: f64, cell_size: f64, offset: Point) -> Result<Frame> {
    Frame::from_fn(width, height, |x, y| {
        mean + amplitude * value_noise(seed, cell_size, x as f64 + offset.x, y as f64 + offset.y)
    })
}

/// Fraction of pixel `(px, py)` (covering `[p - 0.5, p + 0.5]`) inside a
/// shape centred at `c` with extent `size`.
fn coverage(shape: Shape, c: Point, size: [f64; 2], px: f64, py: f64) -> f64 {
    let overlap = |p: f64, lo: f64, hi: f64| ((p + 0.5).min(hi) - (p - 0.5).max(lo)).max(0.0);
    match shape {
        Shape::Rect => {
            let (hx, hy) = (size[0] / 2.0, size[1] / 2.0);
            overlap(px, c.x - hx, c.x + hx) * overlap(py, c.y - hy, c.y + hy)
        }
        Shape::Disk => {
            const N: usize = 4;
            let (rx, ry) = (size[0] / 2.0, size[1] / 2.0);
            let mut inside = 0;
            for sj in 0..N {
                for si in 0..N {
                    let sx = px - 0.5 + (si as f64 + 0.5) / N as f64;
                    let sy = py - 0.5 + (sj as f64 + 0.5) / N as f64;
                    let (u, v) = ((sx - c.x) / rx, (sy - c.y) / ry);
                    if u * u + v * v <= 1.0 {
                        inside += 1;
                    }
                }
            }
            inside as f64 / (N * N) as f64
        }
    }
}

struct Canvas {
    margin: usize,
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Canvas {
    fn paint(&mut self, shape: Shape, c: Point, size: [f64; 2], intensity: f64) {
        let m = self.margin as f64;
        let (hx, hy) = (size[0] / 2.0 + 1.0, size[1] / 2.0 + 1.0);
        let x0 = ((c.x - hx + m).floor().max(0.0)) as usize;
        let y0 = ((c.y - hy + m).floor().max(0.0)) as usize;
        let x1 = ((c.x + hx + m).ceil() as usize).min(self.width - 1);
        let y1 = ((c.y + hy + m).ceil() as usize).min(self.height - 1);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                let cov = coverage(shape, c, size, cx as f64 - m, cy as f64 - m);
                if cov > 0.0 {
                    let v = &mut self.data[cy * self.width + cx];
                    *v = *v * (1.0 - cov) + intensity * cov;
                }
            }
        }
    }
}

/// Renders frame `t` without speckle, returning it with the true target
/// centers.
pub fn render_clean_frame(spec: &SceneSpec, t: usize) -> Result<(Frame, Vec<TargetTruth>)> {
    if t >= spec.frame_count {
        return Err(Error::param(format!("frame {t} out of range (frame_count {})", spec.frame_count)));
    }
    let (w, h) = (spec.width, spec.height);
    // Large enough that the rotated frame never samples outside the canvas.
    let diag = (w as f64).hypot(h as f64);
    let margin = ((diag - w.min(h) as f64) / 2.0).ceil() as usize + 2;
    let (cw, ch) = (w + 2 * margin, h + 2 * margin);
    let bg = &spec.background;
    let m = margin as f64;
    let mut data = Vec::with_capacity(cw * ch);
    for cy in 0..ch {
        for cx in 0..cw {
            let n = value_noise(bg.texture_seed, bg.cell_size, cx as f64 - m, cy as f64 - m);
            data.push(clamp_intensity(bg.mean + bg.amplitude * n));
        }
    }
    let mut canvas = Canvas {
        margin,
        width: cw,
        height: ch,
        data,
    };
    for o in &spec.static_objects {
        canvas.paint(o.shape, Point::new(o.position[0], o.position[1]), o.size, o.intensity);
    }
    for tg in &spec.targets {
        canvas.paint(tg.shape, tg.center_at(t), tg.size, tg.intensity);
    }

    let angle = spec.rotation_at(t);
    let center = spec.center();
    let frame = if angle == 0.0 {
        Frame::from_fn(w, h, |x, y| canvas.data[(y + margin) * cw + x + margin])?
    } else {
        Frame::from_fn(w, h, |x, y| {
            let s = rotate_about(Point::new(x as f64, y as f64), center, -angle);
            sample_bilinear(&canvas.data, cw, ch, s.x + m, s.y + m).unwrap_or(0.0)
        })?
    };
    Ok((frame, spec.truth_at(t)))
}

/// Per-frame random stream for speckle, derived from `(seed, t)` only.
pub fn speckle_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

/// Multiplicative speckle: every pixel is scaled by an independent
/// `Gamma(shape = L, scale = 1/L)` draw (mean 1, variance `1/L`).
pub fn apply_speckle(frame: &Frame, looks: f64, rng: &mut impl Rng) -> Result<Frame> {
    let gamma = speckle_distribution(looks)?;
    Frame::from_fn(frame.width(), frame.height(), |x, y| frame.get(x, y) * gamma.sample(rng))
}

/// The speckle multiplier distribution for `looks`.
pub fn speckle_distribution(looks: f64) -> Result<Gamma<f64>> {
    if !(looks.is_finite() && looks >= 1.0) {
        return Err(Error::param(format!("speckle looks must be >= 1, got {looks}")));
    }
    Gamma::new(looks, 1.0 / looks).map_err(|e| Error::param(format!("gamma({looks}): {e}")))
}

/// Renders frame `t` including speckle.
pub fn render_frame(spec: &SceneSpec, t: usize) -> Result<(Frame, Vec<TargetTruth>)> {
    let (clean, truth) = render_clean_frame(spec, t)?;
    let frame = match spec.speckle_looks.looks() {
        Some(l) => apply_speckle(&clean, l, &mut speckle_rng(spec.rng_seed, t))?,
        None => clean,
    };
    Ok((frame, truth))
}

/// Files written by [`generate_sequence`].
#[derive(Debug, Clone)]
pub struct GeneratedSequence {
    pub frames: Vec<PathBuf>,
    pub ground_truth: PathBuf,
}

/// File name of frame `t`.
pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:06}.pgm")
}

/// Writes every frame as binary PGM plus `ground_truth.jsonl`.
pub fn generate_sequence(spec: &SceneSpec, dir: &Path) -> Result<GeneratedSequence> {
    spec.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let truth_path = dir.join("ground_truth.jsonl");
    let file = fs::File::create(&truth_path).map_err(|e| Error::io(&truth_path, e))?;
    let mut truth_out = BufWriter::new(file);
    let mut frames = Vec::with_capacity(spec.frame_count);
    for t in 0..spec.frame_count {
        let (frame, targets) = render_frame(spec, t)?;
        let path = dir.join(frame_file_name(t));
        write_pgm(&path, &frame)?;
        frames.push(path);
        let record = serde_json::to_string(&FrameTruth { frame: t, targets }).expect("truth serializes");
        writeln!(truth_out, "{record}").map_err(|e| Error::io(&truth_path, e))?;
    }
    truth_out.flush().map_err(|e| Error::io(&truth_path, e))?;
    Ok(GeneratedSequence {
        frames,
        ground_truth: truth_path,
    })
}

/// Reads a `ground_truth.jsonl` file.
pub fn read_ground_truth(path: &Path) -> Result<Vec<FrameTruth>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::input(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}
