//! Steered binary descriptors: 256 intensity comparisons on a fixed sampling
//! pattern, rotated to the keypoint's intensity-centroid orientation.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::imgproc::Frame;

/// Radius of the patch used for orientation; keypoints must sit at least
/// this far (plus one pixel) inside the frame.
pub const PATCH_RADIUS: usize = 15;

/// Number of discrete orientation bins (12 degrees each).
pub const ORIENTATION_BINS: usize = 30;

/// Comparison pairs `[ax, ay, bx, by]`, offsets within a radius-12 disk.
///
/// Generated by SplitMix64 seeded with `0x5ACD_0B1E_F000_0256`: each
/// candidate draws four values `next() % 25 - 12`; it is accepted when both
/// endpoints lie inside the disk of radius 12 and are distinct. The first
/// 256 accepted candidates form the table. `pattern_matches_generator`
/// re-derives it.
#[rustfmt::skip]
pub const SAMPLING_PATTERN: [[i8; 4]; 256] = [
    [-8, 7, 4, 1], [-10, -6, 3, 2], [3, 9, -1, -3], [4, -9, 0, 12],
    [-3, 2, -9, -2], [2, -7, -3, -3], [-6, -3, -10, 6], [2, -5, 7, 5],
    [-8, -6, 1, 11], [-9, -7, 4, 4], [-7, 6, 0, -7], [-3, 8, -6, -2],
    [-2, 2, -6, 8], [5, 8, 3, -1], [2, -8, -7, 9], [-11, -3, 5, -3],
    [2, 9, -4, 11], [-11, -1, -7, 3], [-5, -4, 1, 8], [-4, 8, 10, -2],
    [-1, -4, 4, -11], [-8, -1, 4, 8], [-2, -9, 0, -6], [7, 6, -8, -3],
    [0, -12, 8, 8], [-3, 3, -9, -4], [-5, 3, -2, 2], [7, 8, -4, 5],
    [0, -3, 0, -6], [7, 6, -1, -6], [0, 0, -10, -6], [2, 4, 9, 5],
    [-6, -5, 4, -10], [11, -1, -10, -4], [10, -1, -6, -9], [-8, -6, 8, 6],
    [-1, -10, -8, 5], [-1, -3, 5, -9], [-7, 5, -6, 9], [-7, 4, 5, -10],
    [0, -1, 5, -7], [-3, 10, -2, -7], [-7, 9, -3, -8], [-2, -10, -6, 1],
    [10, -3, -4, -7], [10, -4, 7, -7], [-1, 2, 2, 6], [1, -6, 1, -1],
    [1, 4, -3, -7], [-11, -4, -11, -1], [-7, 2, 9, -7], [-5, 5, 4, -7],
    [-9, -1, 2, -9], [-10, -4, 7, 9], [7, -3, 3, 2], [6, 2, -6, -10],
    [-1, 11, 11, -4], [-5, -4, 0, -11], [-2, -1, -3, 3], [7, 9, -3, -4],
    [3, 2, 4, 1], [-1, 10, -2, -6], [0, 0, -10, -3], [1, -4, 5, 2],
    [8, -4, 3, 2], [9, 5, 8, 8], [11, -4, 6, -4], [-10, 0, 2, 6],
    [6, -4, 4, -9], [1, -9, -7, -8], [5, -10, 5, 8], [4, -9, 2, -2],
    [-1, -10, 5, -7], [-1, -11, -8, -7], [12, 0, -1, 10], [5, 7, -2, -5],
    [10, 1, 7, 8], [-3, 3, -7, -1], [4, 0, -4, 2], [-9, 2, 6, -2],
    [-5, 6, -5, 10], [6, 8, 8, 8], [4, 4, 1, 2], [9, -5, 6, -6],
    [-1, 5, -1, 4], [-9, 3, -4, 3], [-4, -4, 8, 3], [-3, -5, 3, -6],
    [7, 6, 3, -11], [1, -11, -4, 3], [6, 1, 8, 1], [4, 5, -5, -2],
    [7, -2, -9, -1], [-2, -1, -2, 9], [-8, -4, 8, 0], [1, 8, -4, 5],
    [-4, -10, -4, 5], [-3, -5, -6, -6], [4, 5, -4, 1], [-1, 11, -8, -1],
    [2, 2, -4, -7], [5, 3, -1, -9], [-5, 4, 3, -8], [7, -8, 1, -5],
    [-4, 8, 7, 7], [-9, 3, 2, -8], [9, 2, 6, -1], [0, 1, -1, 7],
    [3, -5, 10, 4], [5, -6, -9, 6], [-1, -10, 0, -2], [0, -2, -10, 5],
    [-9, -3, -10, 6], [4, -9, -5, 3], [5, -2, 0, -4], [0, -3, -4, 0],
    [-3, -10, -9, 2], [3, 9, -1, -9], [-8, -2, 4, 8], [4, -4, 12, 0],
    [9, -3, -8, -2], [4, 11, -5, 4], [5, 9, 8, 2], [7, 9, -2, -6],
    [1, 2, -10, 4], [-10, -5, 1, -1], [0, 11, 7, -3], [-10, 0, -2, -4],
    [2, 1, 5, 7], [1, -8, -7, 7], [3, -8, -2, 10], [11, 4, -6, 6],
    [4, 5, -7, -1], [8, 2, -3, -8], [2, 0, -2, 0], [-9, 4, -5, -2],
    [-1, -4, -7, -2], [7, 2, 4, -5], [3, -9, -7, -3], [3, -11, -12, 0],
    [-10, 5, 9, 0], [8, -6, 6, 9], [12, 0, -4, 2], [1, 6, -11, 0],
    [-6, 9, 10, 5], [3, -4, 7, -5], [5, 2, -10, -6], [-4, 5, -10, 0],
    [2, 6, 3, 3], [-6, -7, -8, -4], [-3, 7, -10, 6], [2, 9, -6, -3],
    [3, -10, 3, 6], [1, 5, -4, -5], [2, 3, 7, -5], [-4, -5, -9, -7],
    [11, 1, 9, 2], [4, -4, 2, -10], [6, -7, 0, 2], [-8, -1, -4, 11],
    [-9, -2, 3, -4], [1, 1, -9, -7], [3, -6, -2, -7], [10, -1, -8, 0],
    [-3, 7, 5, 7], [-10, -3, -4, -3], [1, 7, 2, -3], [11, -3, 4, -6],
    [-4, -9, 6, 4], [6, 6, 1, 3], [-2, -3, -3, -6], [-3, 9, -9, -1],
    [-4, 10, -4, 9], [1, 6, 4, 6], [2, -10, 4, -4], [12, 0, -2, 9],
    [4, 8, 0, -7], [2, 7, 8, 0], [-1, 4, -6, 8], [-8, -4, -10, 5],
    [3, 7, -8, -5], [1, -10, -5, 5], [-10, 4, 11, 3], [-2, -3, 6, -7],
    [3, 3, -7, 1], [-2, -3, -5, -2], [-8, -1, -3, -6], [8, 7, -8, -1],
    [2, 4, -2, -2], [-9, -4, -9, -1], [-5, -8, -6, 5], [-9, 6, -2, -10],
    [0, -3, -10, -3], [8, 3, 4, 6], [3, -6, -7, -7], [-6, 10, -7, 2],
    [6, -7, 1, -2], [-11, 1, 1, 7], [11, 3, -4, 5], [-2, 0, -5, -4],
    [10, 1, -10, -6], [-3, 9, -5, -9], [1, -8, -1, 1], [-8, -5, -4, -6],
    [8, 3, -4, -3], [0, 4, 8, -3], [-10, -5, 7, 0], [2, 4, 8, -3],
    [-10, -4, -7, 8], [12, 0, -3, 6], [1, 6, 2, 9], [-7, 3, 5, -8],
    [4, 9, -9, -5], [4, -8, -1, 1], [-8, -2, 1, 3], [11, -4, -2, 9],
    [-9, -3, 4, -9], [-8, 0, -1, 5], [10, 0, 3, -5], [-1, 0, 2, -4],
    [-4, 8, 11, -3], [-4, -7, 5, 9], [0, 5, 9, -6], [2, 9, -11, -2],
    [2, -6, -3, 11], [-3, 0, 4, -9], [7, 0, -4, 2], [-5, 5, 4, 10],
    [-4, 4, 11, 3], [0, 2, -2, 8], [0, -11, 7, -7], [7, -2, 4, 3],
    [-7, 5, -1, 2], [8, 1, -10, 0], [11, -3, -2, 9], [5, 5, -4, -10],
    [-4, 7, -6, 0], [-5, -5, 0, -12], [0, 12, -4, -9], [-3, -10, 4, 5],
    [8, 1, 11, -1], [-8, 7, 4, 10], [3, 9, 4, 11], [7, -9, -2, -9],
    [-9, 3, -9, 7], [3, 4, -6, 7], [-8, 8, 1, -2], [-6, -7, 4, -1],
    [-8, -3, -3, -10], [1, 11, 3, -6], [-10, -1, 8, -4], [5, 3, 7, -5],
    [11, 4, 1, 11], [-6, -6, 12, 0], [0, 4, 8, 2], [9, -6, 0, -3],
];

/// A 256-bit binary descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BinaryDescriptor(pub [u64; 4]);

impl BinaryDescriptor {
    pub const BITS: u32 = 256;

    #[inline]
    pub fn hamming(&self, other: &BinaryDescriptor) -> u32 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
}

fn steered_patterns() -> &'static [[[i8; 4]; 256]; ORIENTATION_BINS] {
    static TABLE: OnceLock<Box<[[[i8; 4]; 256]; ORIENTATION_BINS]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Box::new([[[0i8; 4]; 256]; ORIENTATION_BINS]);
        for (bin, rotated) in table.iter_mut().enumerate() {
            let (s, c) = (bin as f64 * 2.0 * PI / ORIENTATION_BINS as f64).sin_cos();
            let rot = |x: i8, y: i8| {
                let (x, y) = (f64::from(x), f64::from(y));
                ((c * x - s * y).round() as i8, (s * x + c * y).round() as i8)
            };
            for (dst, src) in rotated.iter_mut().zip(SAMPLING_PATTERN.iter()) {
                let (ax, ay) = rot(src[0], src[1]);
                let (bx, by) = rot(src[2], src[3]);
                *dst = [ax, ay, bx, by];
            }
        }
        table
    })
}

/// Orientation bin for an angle in radians.
pub fn orientation_bin(angle: f64) -> usize {
    let step = 2.0 * PI / ORIENTATION_BINS as f64;
    ((angle / step).round() as i64).rem_euclid(ORIENTATION_BINS as i64) as usize
}

/// Intensity-centroid orientation `atan2(m01, m10)` over the disk of radius
/// [`PATCH_RADIUS`], mapped into `[0, 2π)`.
pub fn intensity_centroid_angle(frame: &Frame, x: usize, y: usize) -> f64 {
    let r = PATCH_RADIUS as isize;
    let (mut m10, mut m01) = (0.0, 0.0);
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy > r * r {
                continue;
            }
            let v = frame.get_clamped(x as isize + dx, y as isize + dy);
            m10 += dx as f64 * v;
            m01 += dy as f64 * v;
        }
    }
    let a = m01.atan2(m10);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Describes the keypoint at integer position `(x, y)` on an already
/// smoothed frame, steering the pattern by `angle`.
pub fn describe(smoothed: &Frame, x: usize, y: usize, angle: f64) -> BinaryDescriptor {
    let pattern = &steered_patterns()[orientation_bin(angle)];
    let mut desc = BinaryDescriptor::default();
    let (xi, yi) = (x as isize, y as isize);
    for (i, p) in pattern.iter().enumerate() {
        let a = smoothed.get_clamped(xi + p[0] as isize, yi + p[1] as isize);
        let b = smoothed.get_clamped(xi + p[2] as isize, yi + p[3] as isize);
        if a < b {
            desc.set(i);
        }
    }
    desc
}
