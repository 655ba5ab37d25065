//! Segment-test corner detection on the 16-pixel Bresenham circle of radius 3.

use crate::imgproc::Frame;

/// Circle offsets in clockwise order starting straight up.
pub(crate) const CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

/// A raw segment-test corner before orientation and description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

/// Longest run (with wrap-around) of `true` in a 16-entry ring.
fn longest_run(flags: &[bool; 16]) -> usize {
    if flags.iter().all(|&f| f) {
        return 16;
    }
    let mut best = 0;
    let mut run = 0;
    for i in 0..32 {
        if flags[i % 16] {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

/// Segment test at `(x, y)`. Returns the corner score when at least `arc`
/// contiguous circle pixels are all brighter than `center + threshold` or all
/// darker than `center - threshold`.
///
/// The score is the summed excess `|I(p) - I(c)| - threshold` over the circle
/// pixels on the winning side.
pub fn segment_test(frame: &Frame, x: usize, y: usize, threshold: f64, arc: usize) -> Option<f64> {
    let c = frame.get(x, y);
    let mut brighter = [false; 16];
    let mut darker = [false; 16];
    let mut vals = [0.0; 16];
    for (i, &(dx, dy)) in CIRCLE.iter().enumerate() {
        let v = frame.get((x as isize + dx) as usize, (y as isize + dy) as usize);
        vals[i] = v;
        brighter[i] = v > c + threshold;
        darker[i] = v < c - threshold;
    }
    let score_side = |flags: &[bool; 16]| -> f64 {
        vals.iter()
            .zip(flags)
            .filter(|(_, &f)| f)
            .map(|(&v, _)| (v - c).abs() - threshold)
            .sum()
    };
    let b = longest_run(&brighter) >= arc;
    let d = longest_run(&darker) >= arc;
    match (b, d) {
        (true, true) => Some(score_side(&brighter).max(score_side(&darker))),
        (true, false) => Some(score_side(&brighter)),
        (false, true) => Some(score_side(&darker)),
        (false, false) => None,
    }
}

/// Runs the segment test over every pixel at least `border` pixels inside
/// the frame, applies 3x3 non-maximum suppression and returns corners sorted
/// by descending score (raster order among equal scores).
pub fn detect_corners(frame: &Frame, threshold: f64, arc: usize, border: usize) -> Vec<Corner> {
    let (w, h) = (frame.width(), frame.height());
    let border = border.max(3);
    if w <= 2 * border || h <= 2 * border {
        return Vec::new();
    }
    let mut scores = vec![0.0f64; w * h];
    for y in border..h - border {
        for x in border..w - border {
            if let Some(s) = segment_test(frame, x, y, threshold, arc) {
                // A zero-excess corner still fires; keep it above "no corner".
                scores[y * w + x] = s.max(f64::MIN_POSITIVE);
            }
        }
    }
    let mut corners = Vec::new();
    for y in border..h - border {
        for x in border..w - border {
            let s = scores[y * w + x];
            if s <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'nbr: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let ni = (y as isize + dy) as usize * w + (x as isize + dx) as usize;
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    // Ties go to the raster-first pixel.
                    if scores[ni] > s || (earlier && scores[ni] == s) {
                        is_max = false;
                        break 'nbr;
                    }
                }
            }
            if is_max {
                corners.push(Corner { x, y, score: s });
            }
        }
    }
    corners.sort_by(|a, b| b.score.total_cmp(&a.score));
    corners
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_frame() -> Frame {
        Frame::from_fn(64, 64, |x, y| {
            if (22..42).contains(&x) && (22..42).contains(&y) {
                220.0
            } else {
                30.0
            }
        })
        .unwrap()
    }

    #[test]
    fn run_length_wraps() {
        let mut f = [false; 16];
        for i in [14, 15, 0, 1, 2, 3, 4, 5, 6] {
            f[i] = true;
        }
        assert_eq!(longest_run(&f), 9);
    }

    #[test]
    fn square_corner_pixel_passes_segment_test() {
        // At (22, 22) the 12 circle pixels outside the square are all darker
        // than the bright corner pixel by 190.
        let f = square_frame();
        assert!(segment_test(&f, 22, 22, 20.0, 9).is_some());
        // Middle of an edge: only 7 circle pixels lie outside.
        assert!(segment_test(&f, 32, 22, 20.0, 9).is_none());
        // Flat interior.
        assert!(segment_test(&f, 32, 32, 20.0, 9).is_none());
    }

    #[test]
    fn constant_frame_has_no_corners() {
        let f = Frame::filled(64, 64, 120.0).unwrap();
        assert!(detect_corners(&f, 20.0, 9, 3).is_empty());
    }

    #[test]
    fn corners_sorted_and_suppressed() {
        let c = detect_corners(&square_frame(), 20.0, 9, 3);
        assert!(c.len() >= 4);
        assert!(c.windows(2).all(|w| w[0].score >= w[1].score));
        for a in &c {
            for b in &c {
                if a != b {
                    assert!(a.x.abs_diff(b.x) > 1 || a.y.abs_diff(b.y) > 1);
                }
            }
        }
    }
}
