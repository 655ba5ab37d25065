//! Iterative Lucas-Kanade point tracking with an optional image pyramid.

use serde::{Deserialize, Serialize};

use super::FlowSample;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::imgproc::Frame;

/// Convergence threshold on the per-iteration update, in pixels.
pub const LK_CONVERGENCE: f64 = 0.01;

/// Tunables for a single LK solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LkParams {
    pub window_radius: usize,
    pub max_iterations: usize,
    pub pyramid_levels: usize,
    /// Minimum structure-tensor eigenvalue, as a multiple of the window area.
    pub min_eigen_factor: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        LkParams {
            window_radius: 7,
            max_iterations: 10,
            pyramid_levels: 1,
            min_eigen_factor: 1e-4,
        }
    }
}

impl LkParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_radius == 0 {
            return Err(Error::param("window_radius must be >= 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations must be >= 1"));
        }
        if !(1..=4).contains(&self.pyramid_levels) {
            return Err(Error::param("pyramid_levels must be in 1..=4"));
        }
        if !(self.min_eigen_factor.is_finite() && self.min_eigen_factor >= 0.0) {
            return Err(Error::param("min_eigen_factor must be non-negative"));
        }
        Ok(())
    }

    fn window_area(&self) -> f64 {
        let side = 2 * self.window_radius + 1;
        (side * side) as f64
    }
}

struct Level {
    width: usize,
    height: usize,
    prev: Vec<f64>,
    next: Vec<f64>,
    grad_x: Vec<f64>,
    grad_y: Vec<f64>,
}

impl Level {
    fn new(width: usize, height: usize, prev: Vec<f64>, next: Vec<f64>) -> Self {
        let (grad_x, grad_y) = central_gradients(&prev, width, height);
        Level {
            width,
            height,
            prev,
            next,
            grad_x,
            grad_y,
        }
    }
}

/// Central-difference gradients; one-sided at the borders.
fn central_gradients(data: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            gx[y * w + x] = (data[y * w + xp] - data[y * w + xm]) / (xp - xm) as f64;
            gy[y * w + x] = (data[yp * w + x] - data[ym * w + x]) / (yp - ym) as f64;
        }
    }
    (gx, gy)
}

/// 5-tap binomial smoothing then 2x decimation.
fn pyr_down(data: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let smoothed = crate::imgproc::convolve_separable(data, w, h, &K);
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        for x in 0..nw {
            out.push(smoothed[(2 * y) * w + 2 * x]);
        }
    }
    (out, nw, nh)
}

/// Fills `out` with the `(2r+1)^2` bilinear samples of `data` centred at
/// `(cx, cy)`, row-major. Reads outside the raster are edge-clamped.
#[inline]
fn sample_window(data: &[f64], w: usize, h: usize, cx: f64, cy: f64, r: usize, out: &mut [f64]) {
    let fx0 = cx.floor();
    let fy0 = cy.floor();
    let ax = cx - fx0;
    let ay = cy - fy0;
    let w00 = (1.0 - ax) * (1.0 - ay);
    let w10 = ax * (1.0 - ay);
    let w01 = (1.0 - ax) * ay;
    let w11 = ax * ay;
    let side = 2 * r + 1;
    let x0 = fx0 as isize - r as isize;
    let y0 = fy0 as isize - r as isize;
    let inside = x0 >= 0 && y0 >= 0 && (x0 + side as isize) < w as isize && (y0 + side as isize) < h as isize;
    if inside && ax == 0.0 && ay == 0.0 {
        let (x0, y0) = (x0 as usize, y0 as usize);
        for j in 0..side {
            let r0 = (y0 + j) * w + x0;
            out[j * side..(j + 1) * side].copy_from_slice(&data[r0..r0 + side]);
        }
    } else if inside {
        let (x0, y0) = (x0 as usize, y0 as usize);
        for j in 0..side {
            let r0 = (y0 + j) * w + x0;
            let r1 = r0 + w;
            let dst = &mut out[j * side..(j + 1) * side];
            for (i, d) in dst.iter_mut().enumerate() {
                *d = w00 * data[r0 + i] + w10 * data[r0 + i + 1] + w01 * data[r1 + i] + w11 * data[r1 + i + 1];
            }
        }
    } else {
        let at = |x: isize, y: isize| {
            let xc = x.clamp(0, w as isize - 1) as usize;
            let yc = y.clamp(0, h as isize - 1) as usize;
            data[yc * w + xc]
        };
        for j in 0..side as isize {
            for i in 0..side as isize {
                let (x, y) = (x0 + i, y0 + j);
                out[(j as usize) * side + i as usize] =
                    w00 * at(x, y) + w10 * at(x + 1, y) + w01 * at(x, y + 1) + w11 * at(x + 1, y + 1);
            }
        }
    }
}

/// Precomputed pyramids and gradients for tracking many points between one
/// pair of frames.
pub struct LkTracker {
    levels: Vec<Level>,
    params: LkParams,
}

enum LevelOutcome {
    Converged(f64, f64),
    /// Window did not fit or the structure tensor was too weak.
    Unusable,
}

impl LkTracker {
    pub fn new(prev: &Frame, next: &Frame, params: LkParams) -> Result<Self> {
        params.validate()?;
        if (prev.width(), prev.height()) != (next.width(), next.height()) {
            return Err(Error::param(format!(
                "flow frames differ in size: {}x{} vs {}x{}",
                prev.width(),
                prev.height(),
                next.width(),
                next.height()
            )));
        }
        let (w, h) = (prev.width(), prev.height());
        let mut levels = vec![Level::new(w, h, prev.pixels().to_vec(), next.pixels().to_vec())];
        for _ in 1..params.pyramid_levels {
            let last = levels.last().expect("level 0 exists");
            if last.width < 8 || last.height < 8 {
                break;
            }
            let (p, nw, nh) = pyr_down(&last.prev, last.width, last.height);
            let (n, _, _) = pyr_down(&last.next, last.width, last.height);
            levels.push(Level::new(nw, nh, p, n));
        }
        Ok(LkTracker { levels, params })
    }

    pub fn params(&self) -> &LkParams {
        &self.params
    }

    fn solve_level(&self, level: &Level, p: Point, guess: (f64, f64), min_eig: f64, buf: &mut Buffers) -> LevelOutcome {
        let r = self.params.window_radius;
        let rf = r as f64;
        if p.x - rf < 0.0 || p.y - rf < 0.0 || p.x + rf > (level.width - 1) as f64 || p.y + rf > (level.height - 1) as f64 {
            return LevelOutcome::Unusable;
        }
        let (w, h) = (level.width, level.height);
        sample_window(&level.prev, w, h, p.x, p.y, r, &mut buf.template);
        sample_window(&level.grad_x, w, h, p.x, p.y, r, &mut buf.gx);
        sample_window(&level.grad_y, w, h, p.x, p.y, r, &mut buf.gy);
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for (&ix, &iy) in buf.gx.iter().zip(buf.gy.iter()) {
            gxx += ix * ix;
            gxy += ix * iy;
            gyy += iy * iy;
        }
        let half_tr = 0.5 * (gxx + gyy);
        let min_eigen = half_tr - (0.25 * (gxx - gyy).powi(2) + gxy * gxy).sqrt();
        let det = gxx * gyy - gxy * gxy;
        if min_eigen < min_eig || det <= 0.0 {
            return LevelOutcome::Unusable;
        }
        let (mut u, mut v) = guess;
        for _ in 0..self.params.max_iterations {
            sample_window(&level.next, w, h, p.x + u, p.y + v, r, &mut buf.warped);
            let (mut bx, mut by) = (0.0, 0.0);
            for i in 0..buf.template.len() {
                let e = buf.template[i] - buf.warped[i];
                bx += buf.gx[i] * e;
                by += buf.gy[i] * e;
            }
            let du = (gyy * bx - gxy * by) / det;
            let dv = (gxx * by - gxy * bx) / det;
            u += du;
            v += dv;
            if !(u.is_finite() && v.is_finite()) {
                return LevelOutcome::Unusable;
            }
            if du.hypot(dv) < LK_CONVERGENCE {
                break;
            }
        }
        LevelOutcome::Converged(u, v)
    }

    /// Tracks one point from `prev` into `next`.
    pub fn track(&self, origin: Point) -> FlowSample {
        let side = 2 * self.params.window_radius + 1;
        let mut buf = Buffers::new(side * side);
        self.track_with(origin, &mut buf)
    }

    pub(crate) fn track_with(&self, origin: Point, buf: &mut Buffers) -> FlowSample {
        let min_eig0 = self.params.min_eigen_factor * self.params.window_area();
        let mut guess = (0.0, 0.0);
        for (li, level) in self.levels.iter().enumerate().rev() {
            let scale = (1u32 << li) as f64;
            let p = Point::new(origin.x / scale, origin.y / scale);
            let min_eig = min_eig0 / (scale * scale);
            match self.solve_level(level, p, guess, min_eig, buf) {
                LevelOutcome::Converged(u, v) => guess = (u, v),
                LevelOutcome::Unusable if li == 0 => return FlowSample::invalid(origin),
                LevelOutcome::Unusable => {}
            }
            if li > 0 {
                guess = (guess.0 * 2.0, guess.1 * 2.0);
            }
        }
        let target = Point::new(origin.x + guess.0, origin.y + guess.1);
        let base = &self.levels[0];
        if !(target.x >= 0.0 && target.y >= 0.0 && target.x <= (base.width - 1) as f64 && target.y <= (base.height - 1) as f64) {
            return FlowSample::invalid(origin);
        }
        FlowSample::new(origin, target)
    }

    /// Tracks every point in order.
    pub fn track_all(&self, points: &[Point]) -> Vec<FlowSample> {
        let side = 2 * self.params.window_radius + 1;
        let mut buf = Buffers::new(side * side);
        points.iter().map(|&p| self.track_with(p, &mut buf)).collect()
    }
}

pub(crate) struct Buffers {
    template: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
    warped: Vec<f64>,
}

impl Buffers {
    pub(crate) fn for_params(params: &LkParams) -> Self {
        let side = 2 * params.window_radius + 1;
        Buffers::new(side * side)
    }

    fn new(n: usize) -> Self {
        Buffers {
            template: vec![0.0; n],
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            warped: vec![0.0; n],
        }
    }
}

/// Sparse LK flow for `points` from `prev` to `next` on a single pyramid
/// level.
pub fn lk_flow(prev: &Frame, next: &Frame, points: &[Point], window_radius: usize, max_iterations: usize) -> Result<Vec<FlowSample>> {
    let tracker = LkTracker::new(
        prev,
        next,
        LkParams {
            window_radius,
            max_iterations,
            ..LkParams::default()
        },
    )?;
    Ok(tracker.track_all(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::value_noise_frame;

    fn shifted_pair(dx: f64, dy: f64) -> (Frame, Frame) {
        let a = value_noise_frame(128, 128, 5, 128.0, 80.0, 8.0, Point::new(0.0, 0.0)).unwrap();
        let b = value_noise_frame(128, 128, 5, 128.0, 80.0, 8.0, Point::new(-dx, -dy)).unwrap();
        (a, b)
    }

    fn interior_points() -> Vec<Point> {
        let mut pts = Vec::new();
        for y in (20..108).step_by(8) {
            for x in (20..108).step_by(8) {
                pts.push(Point::new(x as f64, y as f64));
            }
        }
        pts
    }

    #[test]
    fn identical_frames_give_zero_motion() {
        let (a, _) = shifted_pair(0.0, 0.0);
        let flow = lk_flow(&a, &a, &interior_points(), 7, 10).unwrap();
        assert!(flow.iter().all(|s| s.valid && s.magnitude < 1e-12));
    }

    #[test]
    fn recovers_known_translation() {
        let (a, b) = shifted_pair(2.0, 0.0);
        let flow = lk_flow(&a, &b, &interior_points(), 7, 10).unwrap();
        let good = flow
            .iter()
            .filter(|s| s.valid && (s.target.x - s.origin.x - 2.0).abs() <= 0.25 && (s.target.y - s.origin.y).abs() <= 0.25)
            .count();
        assert!(good as f64 >= 0.9 * flow.len() as f64, "{good}/{}", flow.len());
    }

    #[test]
    fn pyramid_handles_large_motion() {
        let (a, b) = shifted_pair(9.0, -6.0);
        let tracker = LkTracker::new(&a, &b, LkParams { window_radius: 5, max_iterations: 20, pyramid_levels: 3, ..LkParams::default() }).unwrap();
        let pts: Vec<_> = interior_points().into_iter().filter(|p| p.x > 30.0 && p.x < 98.0 && p.y > 30.0 && p.y < 98.0).collect();
        let flow = tracker.track_all(&pts);
        let good = flow
            .iter()
            .filter(|s| s.valid && (s.target.x - s.origin.x - 9.0).abs() <= 0.25 && (s.target.y - s.origin.y + 6.0).abs() <= 0.25)
            .count();
        assert!(good as f64 >= 0.8 * flow.len() as f64, "{good}/{}", flow.len());
    }

    #[test]
    fn constant_frames_are_invalid() {
        let c = Frame::filled(64, 64, 80.0).unwrap();
        let flow = lk_flow(&c, &c, &[Point::new(32.0, 32.0), Point::new(20.0, 40.0)], 7, 10).unwrap();
        assert!(flow.iter().all(|s| !s.valid));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = Frame::filled(64, 64, 1.0).unwrap();
        let b = Frame::filled(64, 65, 1.0).unwrap();
        assert!(matches!(lk_flow(&a, &b, &[], 7, 10), Err(Error::Parameter(_))));
    }

    #[test]
    fn window_outside_frame_is_invalid() {
        let (a, b) = shifted_pair(1.0, 0.0);
        let flow = lk_flow(&a, &b, &[Point::new(3.0, 50.0)], 7, 10).unwrap();
        assert!(!flow[0].valid);
    }
}
