//! Rotation correction between consecutive frames.
//!
//! Oriented segment-test corners are described with steered binary
//! descriptors, matched by Hamming distance with a mutual-consistency check,
//! pruned to the best fraction, and fed to a rigid Procrustes fit.

pub mod descriptor;
pub mod fast;
pub mod matching;
pub mod rigid;

pub use descriptor::{BinaryDescriptor, PATCH_RADIUS};
pub use matching::{filter_matches, match_features, FeatureMatch};
pub use rigid::{estimate_transform, warp_frame, RigidTransform};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::imgproc::{gaussian_blur, Frame};

/// Smallest frame side accepted by [`detect_features`].
pub const MIN_FEATURE_FRAME: usize = 64;

/// Smoothing applied before descriptor sampling.
const DESCRIPTOR_SMOOTHING_SIGMA: f64 = 2.0;

/// A detected corner with its orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub response: f64,
    /// Radians in `[0, 2π)`.
    pub orientation: f64,
}

impl Keypoint {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub keypoint: Keypoint,
    pub descriptor: BinaryDescriptor,
}

/// Registration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistrationConfig {
    pub enabled: bool,
    pub max_features: usize,
    pub keep_fraction: f64,
    pub fast_threshold: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            enabled: false,
            max_features: 500,
            keep_fraction: 0.25,
            fast_threshold: 20.0,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_features == 0 {
            return Err(Error::param("registration.max_features must be positive"));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::param("registration.keep_fraction must be in (0, 1]"));
        }
        if !(self.fast_threshold.is_finite() && self.fast_threshold > 0.0) {
            return Err(Error::param("registration.fast_threshold must be positive"));
        }
        Ok(())
    }
}

/// Detects up to `max_count` oriented corners (segment-test arc 9 of 16) and
/// computes their descriptors.
pub fn detect_features(frame: &Frame, max_count: usize, fast_threshold: f64) -> Result<Vec<Feature>> {
    if frame.width() < MIN_FEATURE_FRAME || frame.height() < MIN_FEATURE_FRAME {
        return Err(Error::param(format!(
            "feature detection needs at least {MIN_FEATURE_FRAME}x{MIN_FEATURE_FRAME}, got {}x{}",
            frame.width(),
            frame.height()
        )));
    }
    if max_count == 0 {
        return Err(Error::param("max_count must be positive"));
    }
    let mut corners = fast::detect_corners(frame, fast_threshold, 9, PATCH_RADIUS + 1);
    corners.truncate(max_count);
    if corners.is_empty() {
        return Ok(Vec::new());
    }
    let smoothed = gaussian_blur(frame, DESCRIPTOR_SMOOTHING_SIGMA)?;
    Ok(corners
        .into_iter()
        .map(|c| {
            let orientation = descriptor::intensity_centroid_angle(frame, c.x, c.y);
            Feature {
                keypoint: Keypoint {
                    x: c.x as f64,
                    y: c.y as f64,
                    response: c.score,
                    orientation,
                },
                descriptor: descriptor::describe(&smoothed, c.x, c.y, orientation),
            }
        })
        .collect())
}

/// Full detect -> match -> filter -> estimate chain. The returned transform
/// maps `prev` coordinates onto `cur` coordinates about the frame center.
pub fn register_pair(prev: &Frame, cur: &Frame, config: &RegistrationConfig) -> Result<RigidTransform> {
    if (prev.width(), prev.height()) != (cur.width(), cur.height()) {
        return Err(Error::param("registration frames differ in size"));
    }
    let fa = detect_features(prev, config.max_features, config.fast_threshold)?;
    let fb = detect_features(cur, config.max_features, config.fast_threshold)?;
    if fa.is_empty() || fb.is_empty() {
        return Err(Error::Degenerate("no features to register".into()));
    }
    let da: Vec<_> = fa.iter().map(|f| f.descriptor).collect();
    let db: Vec<_> = fb.iter().map(|f| f.descriptor).collect();
    let matches = match_features(&da, &db)?;
    if matches.is_empty() {
        return Err(Error::Degenerate("no mutual feature matches".into()));
    }
    let best = filter_matches(&matches, config.keep_fraction)?;
    let pairs: Vec<(Point, Point)> = best
        .iter()
        .map(|m| (fa[m.index_a].keypoint.position(), fb[m.index_b].keypoint.position()))
        .collect();
    estimate_transform(&pairs, RigidTransform::frame_center(prev.width(), prev.height()))
}
