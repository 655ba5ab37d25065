//! Marker overlays drawn straight into the pixel raster.

use crate::blob::Blob;
use crate::geometry::Point;
use crate::imgproc::Frame;

pub const TRACKED_INTENSITY: f64 = 255.0;
pub const BLOB_INTENSITY: f64 = 200.0;
pub const DETECTION_INTENSITY: f64 = 255.0;

fn put(frame: &mut Frame, x: i64, y: i64, v: f64) {
    if x >= 0 && y >= 0 && (x as usize) < frame.width() && (y as usize) < frame.height() {
        frame.set(x as usize, y as usize, v);
    }
}

fn pixel(p: Point) -> (i64, i64) {
    (p.x.round() as i64, p.y.round() as i64)
}

/// Tracked points as 3x3 crosses, blob squares as 1-px outlines and
/// detections as filled 7x7 squares, in that drawing order. Markers are
/// clipped at the frame border.
pub fn annotate(frame: &Frame, detections: &[Point], blobs: &[Blob], tracked: &[Point]) -> Frame {
    let mut out = frame.clone();
    for &p in tracked {
        let (x, y) = pixel(p);
        for d in -1..=1 {
            put(&mut out, x + d, y, TRACKED_INTENSITY);
            put(&mut out, x, y + d, TRACKED_INTENSITY);
        }
    }
    for b in blobs {
        let x0 = (b.centroid.x - b.radius).round() as i64;
        let x1 = (b.centroid.x + b.radius).round() as i64;
        let y0 = (b.centroid.y - b.radius).round() as i64;
        let y1 = (b.centroid.y + b.radius).round() as i64;
        for x in x0..=x1 {
            put(&mut out, x, y0, BLOB_INTENSITY);
            put(&mut out, x, y1, BLOB_INTENSITY);
        }
        for y in y0..=y1 {
            put(&mut out, x0, y, BLOB_INTENSITY);
            put(&mut out, x1, y, BLOB_INTENSITY);
        }
    }
    for &p in detections {
        let (x, y) = pixel(p);
        for dy in -3..=3 {
            for dx in -3..=3 {
                put(&mut out, x + dx, y + dy, DETECTION_INTENSITY);
            }
        }
    }
    out
}
