//! Phase 1: sparse Lucas-Kanade flow on a fixed point grid.
//!
//! Every frame pair, each grid point gets its own flow sample plus dense flow
//! over an `n x n` neighbourhood around it. A grid point is *interesting*
//! when its motion magnitude and direction both deviate from the
//! neighbourhood average beyond the `k1` / `k2` thresholds. Interesting points
//! are kept in a tracked list with a persistence counter that is reset while
//! the point keeps moving differently from the sequence-wide mean motion and
//! incremented otherwise; points whose counter exceeds `k3` are dropped.

pub mod lk;

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use lk::{lk_flow, LkParams, LkTracker};
use lk::Buffers;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point};
use crate::imgproc::Frame;

/// One LK measurement at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub origin: Point,
    pub target: Point,
    /// Apparent movement in pixels.
    pub magnitude: f64,
    /// Direction of motion in `(-π, π]`; 0 when the point did not move.
    pub angle: f64,
    pub valid: bool,
}

impl FlowSample {
    pub fn new(origin: Point, target: Point) -> Self {
        FlowSample {
            origin,
            target,
            magnitude: apparent_movement(origin, target),
            angle: motion_angle(origin, target).unwrap_or(0.0),
            valid: true,
        }
    }

    pub fn invalid(origin: Point) -> Self {
        FlowSample {
            origin,
            target: origin,
            magnitude: 0.0,
            angle: 0.0,
            valid: false,
        }
    }

    /// Valid and with a defined direction.
    pub fn is_moving(&self) -> bool {
        self.valid && self.magnitude > 0.0
    }
}

/// Euclidean distance between a point and its tracked position.
pub fn apparent_movement(p1: Point, p2: Point) -> f64 {
    (p1.x - p2.x).hypot(p1.y - p2.y)
}

/// Full-quadrant motion direction `atan2(y2 - y1, x2 - x1)` in `(-π, π]`.
pub fn motion_angle(p1: Point, p2: Point) -> Result<f64> {
    if p1 == p2 {
        return Err(Error::Degenerate("motion angle undefined for a motionless point".into()));
    }
    Ok(wrap_angle((p2.y - p1.y).atan2(p2.x - p1.x)))
}

/// Signed circular difference `b - a` wrapped into `(-π, π]`.
pub fn circular_difference(a: f64, b: f64) -> f64 {
    wrap_angle(b - a)
}

/// Uniform grid of flow measurement points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGrid {
    pub spacing: usize,
    pub margin: usize,
    pub width: usize,
    pub height: usize,
    pub points: Vec<Point>,
}

/// Points at `(margin + i*d, margin + j*d)` that stay at least `margin` from
/// the far borders, row-major.
pub fn build_point_grid(width: usize, height: usize, spacing: usize, margin: usize) -> Result<PointGrid> {
    if spacing < 4 {
        return Err(Error::param(format!("grid spacing d must be >= 4, got {spacing}")));
    }
    if margin < 1 {
        return Err(Error::param("grid margin must be >= 1"));
    }
    let axis = |dim: usize| -> Vec<usize> {
        if dim < 1 + margin {
            return Vec::new();
        }
        let last = dim - 1 - margin;
        (margin..=last).step_by(spacing).collect()
    };
    let xs = axis(width);
    let ys = axis(height);
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::param(format!(
            "no grid points fit a {width}x{height} frame with margin {margin}"
        )));
    }
    let points = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| Point::new(x as f64, y as f64)))
        .collect();
    Ok(PointGrid {
        spacing,
        margin,
        width,
        height,
        points,
    })
}

/// Average motion of an `n x n` neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodStats {
    pub mean_motion: f64,
    /// Circular mean direction of the moving samples; 0 when none moved.
    pub mean_angle: f64,
    pub sample_count: usize,
    pub moving_count: usize,
}

/// Integer pixel positions of the `n x n` block centred on `center`.
pub fn neighborhood_points(center: Point, window_n: usize) -> Result<Vec<Point>> {
    if window_n < 3 || window_n.is_multiple_of(2) {
        return Err(Error::param(format!("neighbourhood size n must be odd and >= 3, got {window_n}")));
    }
    let h = (window_n / 2) as isize;
    let mut pts = Vec::with_capacity(window_n * window_n);
    for dy in -h..=h {
        for dx in -h..=h {
            pts.push(Point::new(center.x + dx as f64, center.y + dy as f64));
        }
    }
    Ok(pts)
}

/// Mean magnitude over valid samples and circular mean direction over the
/// moving ones. `None` when no sample is valid.
pub fn neighborhood_stats(samples: &[FlowSample]) -> Option<NeighborhoodStats> {
    let (mut sum, mut count) = (0.0, 0usize);
    let (mut s, mut c, mut moving) = (0.0, 0.0, 0usize);
    for smp in samples.iter().filter(|s| s.valid) {
        sum += smp.magnitude;
        count += 1;
        if smp.is_moving() {
            s += smp.angle.sin();
            c += smp.angle.cos();
            moving += 1;
        }
    }
    if count == 0 {
        return None;
    }
    Some(NeighborhoodStats {
        mean_motion: sum / count as f64,
        mean_angle: if moving > 0 { wrap_angle(s.atan2(c)) } else { 0.0 },
        sample_count: count,
        moving_count: moving,
    })
}

/// Thresholds for the interesting-point test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionThresholds {
    /// Relative magnitude deviation.
    pub k1: f64,
    /// Circular angle deviation as a fraction of π.
    pub k2: f64,
    /// Floor on the magnitude used as a divisor.
    pub epsilon_v: f64,
}

/// Relative deviation `|(mean - v) / max(mean, eps)|`.
pub fn relative_deviation(mean: f64, v: f64, epsilon_v: f64) -> f64 {
    ((mean - v) / mean.max(epsilon_v)).abs()
}

/// Both the magnitude and the direction of `sample` must deviate from the
/// neighbourhood average. A motionless sample, or a neighbourhood with no
/// moving samples, has no direction and never passes the angle clause.
pub fn select_interesting(sample: &FlowSample, stats: &NeighborhoodStats, t: &SelectionThresholds) -> bool {
    if !sample.valid {
        return false;
    }
    let magnitude_dev = relative_deviation(stats.mean_motion, sample.magnitude, t.epsilon_v);
    if magnitude_dev <= t.k1 {
        return false;
    }
    if !sample.is_moving() || stats.moving_count == 0 {
        return false;
    }
    circular_difference(stats.mean_angle, sample.angle).abs() / PI > t.k2
}

/// Mean of the neighbourhood mean motions over all grid points with data.
pub fn frame_mean_motion(stats: &[NeighborhoodStats]) -> Option<f64> {
    if stats.is_empty() {
        return None;
    }
    Some(stats.iter().map(|s| s.mean_motion).sum::<f64>() / stats.len() as f64)
}

/// An interesting point and its persistence counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedPoint {
    pub position: Point,
    pub counter: usize,
    /// Motion magnitude measured at this point in the latest frame.
    pub last_motion: f64,
    /// Motion direction measured at this point in the latest frame.
    pub last_angle: f64,
}

/// Sequential Phase 1 state carried across a whole frame stream.
#[derive(Debug, Clone, Default)]
pub struct FlowState {
    pub tracked: Vec<TrackedPoint>,
    /// Running mean of the per-frame mean motions.
    pub running_mean: f64,
    /// Number of frames folded into `running_mean`.
    pub frames_seen: usize,
    /// Latest per-frame mean motion.
    pub last_frame_mean: Option<f64>,
    grid: Option<PointGrid>,
}

impl FlowState {
    pub fn new() -> Self {
        FlowState::default()
    }

    /// Folds one per-frame mean into the running mean.
    pub fn update_running_mean(&mut self, frame_mean: f64) {
        self.frames_seen += 1;
        let t = self.frames_seen as f64;
        self.running_mean = ((t - 1.0) * self.running_mean + frame_mean) / t;
        self.last_frame_mean = Some(frame_mean);
    }

    pub fn grid(&self) -> Option<&PointGrid> {
        self.grid.as_ref()
    }
}

/// Revalidates tracked points against the running mean motion and merges in
/// this frame's interesting points.
///
/// `motion_at` yields the current flow sample at a tracked position (or
/// `None` without data). A point whose relative deviation from the running
/// mean exceeds `k1` has its counter reset; otherwise the counter grows and
/// the point is dropped once it exceeds `k3`. New points already present are
/// reset to zero, others are appended with counter zero.
pub fn revalidate_tracked(
    state: &mut FlowState,
    motion_at: impl Fn(Point) -> Option<FlowSample>,
    new_points: &[FlowSample],
    k1: f64,
    k3: usize,
    epsilon_v: f64,
) {
    let mean = state.running_mean;
    for tp in &mut state.tracked {
        match motion_at(tp.position).filter(|s| s.valid) {
            Some(sample) => {
                tp.last_motion = sample.magnitude;
                tp.last_angle = sample.angle;
                if relative_deviation(mean, sample.magnitude, epsilon_v) > k1 {
                    tp.counter = 0;
                } else {
                    tp.counter += 1;
                }
            }
            None => tp.counter += 1,
        }
    }
    state.tracked.retain(|tp| tp.counter <= k3);
    merge_new_points(state, new_points, 0.0);
}

/// Adds new interesting points to the tracked list. A point within `radius`
/// of an existing entry (the nearest one, exact match when `radius` is 0)
/// resets that entry instead.
pub fn merge_new_points(state: &mut FlowState, new_points: &[FlowSample], radius: f64) {
    for s in new_points {
        let nearest = state
            .tracked
            .iter_mut()
            .map(|tp| (tp.position.distance(s.origin), tp))
            .filter(|(dist, _)| *dist <= radius)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match nearest {
            Some((_, tp)) => {
                tp.counter = 0;
                tp.last_motion = s.magnitude;
                tp.last_angle = s.angle;
            }
            None => state.tracked.push(TrackedPoint {
                position: s.origin,
                counter: 0,
                last_motion: s.magnitude,
                last_angle: s.angle,
            }),
        }
    }
}

/// Phase 1 settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// Grid spacing in pixels.
    #[serde(rename = "d")]
    pub spacing: usize,
    /// Odd neighbourhood side.
    #[serde(rename = "n")]
    pub neighborhood: usize,
    pub window_radius: usize,
    pub max_iterations: usize,
    pub pyramid_levels: usize,
    pub k1: f64,
    pub k2: f64,
    pub k3: usize,
    pub epsilon_v: f64,
    /// Move each surviving tracked point along its measured flow.
    pub advect_tracked: bool,
    /// New points within this distance of a tracked point refresh it instead
    /// of being added; 0 means exact position match.
    pub merge_radius: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            spacing: 16,
            neighborhood: 41,
            window_radius: 4,
            max_iterations: 5,
            pyramid_levels: 1,
            k1: 0.9,
            k2: 0.15,
            k3: 6,
            epsilon_v: 0.5,
            advect_tracked: true,
            merge_radius: 8.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spacing < 4 {
            return Err(Error::param("flow.d must be >= 4"));
        }
        if self.neighborhood < 3 || self.neighborhood.is_multiple_of(2) {
            return Err(Error::param("flow.n must be odd and >= 3"));
        }
        for (name, v) in [("k1", self.k1), ("epsilon_v", self.epsilon_v)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("flow.{name} must be positive")));
            }
        }
        if !(self.k2.is_finite() && self.k2 > 0.0 && self.k2 <= 1.0) {
            return Err(Error::param("flow.k2 must be in (0, 1]"));
        }
        if !(self.merge_radius.is_finite() && self.merge_radius >= 0.0) {
            return Err(Error::param("flow.merge_radius must be >= 0"));
        }
        self.lk_params().validate()
    }

    pub fn lk_params(&self) -> LkParams {
        LkParams {
            window_radius: self.window_radius,
            max_iterations: self.max_iterations,
            pyramid_levels: self.pyramid_levels,
            ..LkParams::default()
        }
    }

    pub fn thresholds(&self) -> SelectionThresholds {
        SelectionThresholds {
            k1: self.k1,
            k2: self.k2,
            epsilon_v: self.epsilon_v,
        }
    }

    /// Grid margin that keeps every neighbourhood window inside the frame.
    pub fn grid_margin(&self) -> usize {
        self.window_radius + 1 + self.neighborhood / 2
    }
}

/// Per-grid-point measurements from one frame pair.
#[derive(Debug, Clone)]
pub struct GridMeasurement {
    pub sample: FlowSample,
    pub stats: Option<NeighborhoodStats>,
    pub interesting: bool,
}

/// Measures flow at every grid point and its neighbourhood.
///
/// Neighbourhoods of adjacent grid points overlap when `n > d`; per-pixel
/// samples are cached over the band of rows the current grid row needs, so
/// each pixel is tracked at most once per frame pair.
pub fn measure_grid(tracker: &LkTracker, grid: &PointGrid, config: &FlowConfig) -> Result<Vec<GridMeasurement>> {
    let thresholds = config.thresholds();
    let n = config.neighborhood;
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::param(format!("neighbourhood size n must be odd and >= 3, got {n}")));
    }
    let half = n / 2;
    let center_index = (n * n) / 2;
    let mut buf = Buffers::for_params(tracker.params());
    let mut rows: BTreeMap<usize, Vec<Option<FlowSample>>> = BTreeMap::new();
    let mut block = Vec::with_capacity(n * n);
    let mut out = Vec::with_capacity(grid.points.len());
    for &p in &grid.points {
        let (gx, gy) = (p.x as usize, p.y as usize);
        if gx < half || gy < half || gx + half >= grid.width || gy + half >= grid.height {
            return Err(Error::param("grid margin is smaller than the neighbourhood"));
        }
        rows = rows.split_off(&(gy - half));
        block.clear();
        for y in gy - half..=gy + half {
            let row = rows.entry(y).or_insert_with(|| vec![None; grid.width]);
            for slot in &mut row[gx - half..=gx + half] {
                let x = gx - half + block.len() % n;
                let s = *slot.get_or_insert_with(|| tracker.track_with(Point::new(x as f64, y as f64), &mut buf));
                block.push(s);
            }
        }
        let sample = block[center_index];
        let stats = neighborhood_stats(&block);
        let interesting = stats.is_some_and(|st| select_interesting(&sample, &st, &thresholds));
        out.push(GridMeasurement {
            sample,
            stats,
            interesting,
        });
    }
    Ok(out)
}

fn grid_key(p: Point) -> (i64, i64) {
    (p.x.round() as i64, p.y.round() as i64)
}

/// Runs one Phase 1 step on the pair `(prev, cur)` and returns the tracked
/// points that survive it.
pub fn process_frame_flow(state: &mut FlowState, prev: &Frame, cur: &Frame, config: &FlowConfig) -> Result<Vec<TrackedPoint>> {
    config.validate()?;
    let (w, h) = (cur.width(), cur.height());
    let rebuild = state.grid.as_ref().is_none_or(|g| (g.width, g.height) != (w, h));
    if rebuild {
        state.grid = Some(build_point_grid(w, h, config.spacing, config.grid_margin())?);
        state.tracked.clear();
    }
    let grid = state.grid.as_ref().expect("grid built above");
    let tracker = LkTracker::new(prev, cur, config.lk_params())?;
    let measurements = measure_grid(&tracker, grid, config)?;

    let stats: Vec<NeighborhoodStats> = measurements.iter().filter_map(|m| m.stats).collect();
    if let Some(mean) = frame_mean_motion(&stats) {
        state.update_running_mean(mean);
    }
    let by_position: HashMap<(i64, i64), FlowSample> =
        measurements.iter().map(|m| (grid_key(m.sample.origin), m.sample)).collect();
    let new_points: Vec<FlowSample> = measurements.iter().filter(|m| m.interesting).map(|m| m.sample).collect();
    if !config.advect_tracked && config.merge_radius == 0.0 {
        revalidate_tracked(
            state,
            |p| by_position.get(&grid_key(p)).copied(),
            &new_points,
            config.k1,
            config.k3,
            config.epsilon_v,
        );
        return Ok(state.tracked.clone());
    }
    // Tracked points may sit off the grid; measure them directly.
    let motion: Vec<FlowSample> = state
        .tracked
        .iter()
        .map(|tp| match by_position.get(&grid_key(tp.position)) {
            Some(s) if s.origin == tp.position => *s,
            _ => tracker.track(tp.position),
        })
        .collect();
    let lookup: HashMap<(u64, u64), FlowSample> =
        motion.iter().map(|s| ((s.origin.x.to_bits(), s.origin.y.to_bits()), *s)).collect();
    revalidate_tracked(
        state,
        |p| lookup.get(&(p.x.to_bits(), p.y.to_bits())).copied(),
        &[],
        config.k1,
        config.k3,
        config.epsilon_v,
    );
    if config.advect_tracked {
        for tp in &mut state.tracked {
            if let Some(s) = lookup.get(&(tp.position.x.to_bits(), tp.position.y.to_bits())).filter(|s| s.valid) {
                tp.position = s.target;
            }
        }
    }
    merge_new_points(state, &new_points, config.merge_radius);
    Ok(state.tracked.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(v: f64, theta: f64) -> FlowSample {
        let o = Point::new(50.0, 50.0);
        FlowSample::new(o, Point::new(o.x + v * theta.cos(), o.y + v * theta.sin()))
    }

    fn stats(v: f64, theta: f64) -> NeighborhoodStats {
        NeighborhoodStats { mean_motion: v, mean_angle: theta, sample_count: 9, moving_count: 9 }
    }

    const T: SelectionThresholds = SelectionThresholds { k1: 0.5, k2: 0.5, epsilon_v: 0.05 };

    #[test]
    fn movement_and_angle_formulas() {
        let p = |x, y| Point::new(x, y);
        assert!((apparent_movement(p(0.0, 0.0), p(3.0, 4.0)) - 5.0).abs() < 1e-9);
        assert_eq!(apparent_movement(p(2.0, 2.0), p(2.0, 2.0)), 0.0);
        assert!((apparent_movement(p(1.0, 1.0), p(-2.0, 5.0)) - 5.0).abs() < 1e-9);
        assert!((motion_angle(p(1.0, 1.0), p(2.0, 2.0)).unwrap() - PI / 4.0).abs() < 1e-9);
        assert!((motion_angle(p(0.0, 0.0), p(-1.0, 0.0)).unwrap() - PI).abs() < 1e-9);
        assert!((motion_angle(p(0.0, 0.0), p(0.0, 3.0)).unwrap() - PI / 2.0).abs() < 1e-9);
        assert!(motion_angle(p(1.0, 1.0), p(1.0, 1.0)).is_err());
    }

    #[test]
    fn grid_counts() {
        // 10 + 20i <= 89 admits i = 0..=3 on each axis.
        let g = build_point_grid(100, 100, 20, 10).unwrap();
        assert_eq!(g.points.len(), 16);
        assert_eq!(g.points[0], Point::new(10.0, 10.0));
        assert_eq!(g.points[15], Point::new(70.0, 70.0));
        let closed_form = |dim: usize, d: usize, m: usize| (dim - 1 - 2 * m) / d + 1;
        for (w, h, d, m) in [(100, 100, 20, 10), (256, 200, 16, 9), (77, 50, 7, 3)] {
            let g = build_point_grid(w, h, d, m).unwrap();
            assert_eq!(g.points.len(), closed_form(w, d, m) * closed_form(h, d, m));
        }
        let one = build_point_grid(64, 64, 64, 1).unwrap();
        assert_eq!(one.points, vec![Point::new(1.0, 1.0)]);
        assert!(build_point_grid(10, 10, 4, 5).is_err());
        assert!(build_point_grid(100, 100, 3, 5).is_err());
    }

    #[test]
    fn neighborhood_means() {
        let same: Vec<_> = (0..9).map(|_| sample(1.5, 0.3)).collect();
        let st = neighborhood_stats(&same).unwrap();
        assert!((st.mean_motion - 1.5).abs() < 1e-12 && (st.mean_angle - 0.3).abs() < 1e-12);

        let wrap = [sample(1.0, 170f64.to_radians()), sample(1.0, -170f64.to_radians())];
        let st = neighborhood_stats(&wrap).unwrap();
        assert!((st.mean_angle.abs() - PI).abs() < 1e-9);

        let mags = [sample(1.0, 0.7), sample(2.0, 0.7), sample(3.0, 0.7)];
        assert!((neighborhood_stats(&mags).unwrap().mean_motion - 2.0).abs() < 1e-12);

        assert!(neighborhood_stats(&[FlowSample::invalid(Point::default())]).is_none());
    }

    #[test]
    fn selection_cases() {
        assert!(!select_interesting(&sample(1.0, 0.4), &stats(1.0, 0.4), &T));
        assert!(select_interesting(&sample(3.0, PI), &stats(1.0, 0.0), &T));
        let t = SelectionThresholds { k2: 0.01, ..T };
        assert!(!select_interesting(&sample(3.0, 0.0), &stats(1.0, 0.0), &t));
    }

    #[test]
    fn frame_means() {
        let s = |v| stats(v, 0.0);
        assert_eq!(frame_mean_motion(&[s(2.0), s(2.0)]), Some(2.0));
        assert_eq!(frame_mean_motion(&[s(0.0), s(4.0)]), Some(2.0));
        assert_eq!(frame_mean_motion(&[s(0.0); 5]), Some(0.0));
        assert_eq!(frame_mean_motion(&[]), None);
    }

    #[test]
    fn running_mean_cases() {
        let mut st = FlowState::new();
        st.update_running_mean(3.0);
        assert_eq!((st.running_mean, st.frames_seen), (3.0, 1));
        let mut st = FlowState::new();
        for v in [1.0, 2.0, 3.0] {
            st.update_running_mean(v);
        }
        assert!((st.running_mean - 2.0).abs() < 1e-15);
        let mut st = FlowState::new();
        for _ in 0..50 {
            st.update_running_mean(0.7);
            assert!((st.running_mean - 0.7).abs() < 1e-15);
        }
    }

    fn state_with_point(mean: f64) -> FlowState {
        let mut st = FlowState::new();
        st.update_running_mean(mean);
        st.tracked.push(TrackedPoint { position: Point::new(10.0, 10.0), counter: 0, last_motion: 0.0, last_angle: 0.0 });
        st
    }

    #[test]
    fn revalidation_resets_on_deviation() {
        let mut st = state_with_point(2.0);
        st.tracked[0].counter = 2;
        revalidate_tracked(&mut st, |p| Some(FlowSample::new(p, Point::new(p.x + 5.0, p.y))), &[], 1.0, 3, 0.05);
        assert_eq!(st.tracked[0].counter, 0);
    }

    #[test]
    fn new_points_dedup_by_position() {
        let mut st = state_with_point(1.0);
        st.tracked[0].counter = 2;
        let again = FlowSample::new(Point::new(10.0, 10.0), Point::new(11.0, 10.0));
        let fresh = FlowSample::new(Point::new(26.0, 10.0), Point::new(27.0, 10.0));
        revalidate_tracked(&mut st, |_| None, &[again, fresh], 0.5, 3, 0.05);
        assert_eq!(st.tracked.len(), 2);
        assert_eq!(st.tracked[0].counter, 0);
        assert_eq!(st.tracked[1].position, Point::new(26.0, 10.0));
    }

    #[test]
    fn merge_radius_refreshes_nearest() {
        let mut st = state_with_point(1.0);
        st.tracked.push(TrackedPoint { position: Point::new(30.0, 10.0), counter: 4, last_motion: 0.0, last_angle: 0.0 });
        st.tracked[0].counter = 2;
        let near_second = FlowSample::new(Point::new(26.0, 11.0), Point::new(28.0, 11.0));
        let far = FlowSample::new(Point::new(60.0, 60.0), Point::new(61.0, 60.0));
        merge_new_points(&mut st, &[near_second, far], 8.0);
        assert_eq!(st.tracked.len(), 3);
        assert_eq!((st.tracked[0].counter, st.tracked[1].counter), (2, 0));
        assert_eq!(st.tracked[1].position, Point::new(30.0, 10.0));
        assert_eq!(st.tracked[2].position, Point::new(60.0, 60.0));
    }

    proptest! {
        #[test]
        fn polar_round_trip(x1 in -500.0f64..500.0, y1 in -500.0f64..500.0, dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
            prop_assume!(dx.abs() + dy.abs() > 1e-6);
            let p1 = Point::new(x1, y1);
            let p2 = Point::new(x1 + dx, y1 + dy);
            let m = apparent_movement(p1, p2);
            let a = motion_angle(p1, p2).unwrap();
            prop_assert!(a > -PI && a <= PI);
            let back = Point::new(p1.x + m * a.cos(), p1.y + m * a.sin());
            prop_assert!(back.distance(p2) < 1e-9);
        }

        #[test]
        fn circular_mean_of_symmetric_set(axis in -PI..PI, spread in prop::collection::vec(0.01f64..1.5, 1..6)) {
            let mut samples = Vec::new();
            for s in &spread {
                samples.push(sample(1.0, axis + s));
                samples.push(sample(1.0, axis - s));
            }
            let st = neighborhood_stats(&samples).unwrap();
            prop_assert!(circular_difference(axis, st.mean_angle).abs() < 1e-9);
        }

        #[test]
        fn selection_is_scale_free(v in 0.1f64..10.0, vbar in 0.1f64..10.0, th in -PI..PI, thbar in -PI..PI, c in 0.5f64..20.0) {
            let a = select_interesting(&sample(v, th), &stats(vbar, thbar), &T);
            let b = select_interesting(&sample(c * v, th), &stats(c * vbar, thbar), &T);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn counters_never_exceed_k3(k3 in 0usize..6, pattern in prop::collection::vec(any::<bool>(), 1..40)) {
            let mut st = state_with_point(1.0);
            for deviate in pattern {
                let step = if deviate { 4.0 } else { 1.0 };
                revalidate_tracked(&mut st, |p| Some(FlowSample::new(p, Point::new(p.x + step, p.y))), &[], 0.5, k3, 0.05);
                prop_assert!(st.tracked.iter().all(|t| t.counter <= k3));
            }
        }
    }
}
