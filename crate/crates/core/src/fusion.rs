//! Phase 3: a tracked point becomes a detection when it falls inside the
//! square of half-side `r_n` around some blob's centroid.

use std::collections::HashSet;

use crate::blob::Blob;
use crate::flow::TrackedPoint;
use crate::geometry::Point;

/// A confirmed change.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_index: usize,
    /// Position of the tracked point.
    pub position: Point,
    /// The first blob (in label order) whose square contains the point.
    pub blob: Blob,
    pub motion_magnitude: f64,
    /// Radians.
    pub motion_angle: f64,
}

/// `|x - x_n| <= r_n` and `|y - y_n| <= r_n`.
pub fn point_in_blob_square(point: Point, blob: &Blob) -> bool {
    (point.x - blob.centroid.x).abs() <= blob.radius && (point.y - blob.centroid.y).abs() <= blob.radius
}

/// At most one detection per tracked point: the scan over blobs stops at the
/// first containing square. Output follows tracked-point order.
pub fn fuse(frame_index: usize, tracked: &[TrackedPoint], blobs: &[Blob]) -> Vec<Detection> {
    tracked
        .iter()
        .filter_map(|tp| {
            blobs.iter().find(|b| point_in_blob_square(tp.position, b)).map(|b| Detection {
                frame_index,
                position: tp.position,
                blob: b.clone(),
                motion_magnitude: tp.last_motion,
                motion_angle: tp.last_angle,
            })
        })
        .collect()
}

/// Moves every tracked point that lies in a blob square onto that blob's
/// centroid. When several points land in the same blob only the first (in
/// list order) is kept.
pub fn recenter_tracked(tracked: &mut Vec<TrackedPoint>, blobs: &[Blob]) {
    let mut used = HashSet::new();
    tracked.retain_mut(|tp| match blobs.iter().find(|b| point_in_blob_square(tp.position, b)) {
        Some(b) => {
            tp.position = b.centroid;
            used.insert(b.label)
        }
        None => true,
    });
}
