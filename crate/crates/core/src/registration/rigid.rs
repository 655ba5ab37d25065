//! Rigid (rotation + translation) transform estimation and frame warping.

use crate::error::{Error, Result};
use crate::geometry::{rotate_about, Point};
use crate::imgproc::Frame;

/// `p -> R(angle) (p - center) + center + (tx, ty)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub angle: f64,
    pub tx: f64,
    pub ty: f64,
    pub center: Point,
}

impl RigidTransform {
    pub fn identity(center: Point) -> Self {
        RigidTransform {
            angle: 0.0,
            tx: 0.0,
            ty: 0.0,
            center,
        }
    }

    /// Frame-center pivot for a `width x height` frame.
    pub fn frame_center(width: usize, height: usize) -> Point {
        Point::new((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)
    }

    pub fn apply(&self, p: Point) -> Point {
        let r = rotate_about(p, self.center, self.angle);
        Point::new(r.x + self.tx, r.y + self.ty)
    }

    pub fn inverse(&self) -> RigidTransform {
        let (s, c) = (-self.angle).sin_cos();
        RigidTransform {
            angle: -self.angle,
            tx: -(c * self.tx - s * self.ty),
            ty: -(s * self.tx + c * self.ty),
            center: self.center,
        }
    }
}

/// Closed-form 2-D Procrustes fit about a fixed pivot.
fn procrustes(pairs: &[(Point, Point)], center: Point) -> Result<RigidTransform> {
    let n = pairs.len() as f64;
    let (mut ma, mut mb) = (Point::default(), Point::default());
    for (a, b) in pairs {
        ma = ma + (*a - center);
        mb = mb + (*b - center);
    }
    ma = Point::new(ma.x / n, ma.y / n);
    mb = Point::new(mb.x / n, mb.y / n);
    let (mut sym, mut anti, mut spread) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        let pa = *a - center - ma;
        let pb = *b - center - mb;
        sym += pa.x * pb.x + pa.y * pb.y;
        anti += pa.x * pb.y - pa.y * pb.x;
        spread += pa.x * pa.x + pa.y * pa.y;
    }
    if spread <= 1e-18 {
        return Err(Error::Degenerate("all source points coincide; rotation is undefined".into()));
    }
    let angle = anti.atan2(sym);
    let (s, c) = angle.sin_cos();
    Ok(RigidTransform {
        angle,
        tx: mb.x - (c * ma.x - s * ma.y),
        ty: mb.y - (s * ma.x + c * ma.y),
        center,
    })
}

/// Least-squares rigid fit mapping each `pair.0` onto `pair.1`, rotating
/// about `center`. One re-fit pass drops pairs whose residual exceeds three
/// times the median residual.
pub fn estimate_transform(pairs: &[(Point, Point)], center: Point) -> Result<RigidTransform> {
    if pairs.len() < 2 {
        return Err(Error::param(format!("rigid fit needs >= 2 pairs, got {}", pairs.len())));
    }
    let first = procrustes(pairs, center)?;
    let residuals: Vec<f64> = pairs.iter().map(|(a, b)| first.apply(*a).distance(*b)).collect();
    let mut sorted = residuals.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let cutoff = 3.0 * median;
    let inliers: Vec<(Point, Point)> = pairs
        .iter()
        .zip(&residuals)
        .filter(|(_, &r)| r <= cutoff)
        .map(|(p, _)| *p)
        .collect();
    if inliers.len() == pairs.len() || inliers.len() < 2 {
        return Ok(first);
    }
    procrustes(&inliers, center).or(Ok(first))
}

/// Inverse-mapped bilinear warp: `out(p) = frame(T^-1 p)`, zero outside the
/// source.
pub fn warp_frame(frame: &Frame, transform: &RigidTransform) -> Frame {
    let inv = transform.inverse();
    let (w, h) = (frame.width(), frame.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let src = inv.apply(Point::new(x as f64, y as f64));
            out.push(frame.sample(src.x, src.y).unwrap_or(0.0));
        }
    }
    Frame::from_raw_unchecked(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cloud() -> Vec<Point> {
        (0..12)
            .map(|i| {
                let t = i as f64;
                Point::new(40.0 + 13.0 * (t * 1.7).sin() * t, 60.0 + 9.0 * (t * 0.9).cos() * t)
            })
            .collect()
    }

    #[test]
    fn recovers_pure_rotation() {
        let center = Point::new(64.0, 64.0);
        let truth = RigidTransform { angle: 10f64.to_radians(), tx: 0.0, ty: 0.0, center };
        let pairs: Vec<_> = cloud().into_iter().map(|p| (p, truth.apply(p))).collect();
        let est = estimate_transform(&pairs, center).unwrap();
        assert!((est.angle.to_degrees() - 10.0).abs() < 1e-6);
    }

    #[test]
    fn recovers_pure_translation() {
        let center = Point::new(64.0, 64.0);
        let pairs: Vec<_> = cloud().into_iter().map(|p| (p, p + Point::new(5.0, -3.0))).collect();
        let est = estimate_transform(&pairs, center).unwrap();
        assert!(est.angle.abs() < 1e-12);
        assert!((est.tx - 5.0).abs() < 1e-9 && (est.ty + 3.0).abs() < 1e-9);
    }

    #[test]
    fn identity_and_errors() {
        let c = Point::new(10.0, 10.0);
        let pairs: Vec<_> = cloud().into_iter().map(|p| (p, p)).collect();
        let est = estimate_transform(&pairs, c).unwrap();
        assert!(est.angle.abs() < 1e-12 && est.tx.abs() < 1e-9 && est.ty.abs() < 1e-9);
        assert!(matches!(estimate_transform(&pairs[..1], c), Err(Error::Parameter(_))));
        let same = vec![(Point::new(1.0, 1.0), Point::new(2.0, 2.0)); 4];
        assert!(matches!(estimate_transform(&same, c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn refit_rejects_gross_outlier() {
        let center = Point::new(50.0, 50.0);
        let truth = RigidTransform { angle: 0.05, tx: 1.0, ty: 2.0, center };
        let mut pairs: Vec<_> = cloud().into_iter().map(|p| (p, truth.apply(p))).collect();
        pairs[3].1 = pairs[3].1 + Point::new(40.0, -25.0);
        let est = estimate_transform(&pairs, center).unwrap();
        assert!((est.angle - 0.05).abs() < 1e-9);
    }

    fn textured() -> Frame {
        Frame::from_fn(48, 40, |x, y| {
            let (x, y) = (x as f64, y as f64);
            127.5 + 60.0 * (x * 0.37).sin() * (y * 0.23).cos() + 40.0 * ((x + y) * 0.11).sin()
        })
        .unwrap()
    }

    #[test]
    fn identity_warp_is_exact() {
        let f = textured();
        let c = RigidTransform::frame_center(48, 40);
        assert_eq!(warp_frame(&f, &RigidTransform::identity(c)), f);
    }

    #[test]
    fn integer_translation_is_exact() {
        let f = textured();
        let t = RigidTransform { angle: 0.0, tx: 3.0, ty: 0.0, center: RigidTransform::frame_center(48, 40) };
        let w = warp_frame(&f, &t);
        for y in 0..40 {
            for x in 0..48 {
                let expect = if x >= 3 { f.get(x - 3, y) } else { 0.0 };
                assert_eq!(w.get(x, y), expect);
            }
        }
    }

    #[test]
    fn rotation_round_trip() {
        // Band-limited texture: bilinear error per pass stays below one level.
        let f = Frame::from_fn(48, 40, |x, y| {
            let (x, y) = (x as f64, y as f64);
            127.5 + 60.0 * (x * 0.2).sin() * (y * 0.15).cos() + 40.0 * ((x + y) * 0.11).sin()
        })
        .unwrap();
        let c = RigidTransform::frame_center(48, 40);
        let t = RigidTransform { angle: 4f64.to_radians(), tx: 0.0, ty: 0.0, center: c };
        let back = warp_frame(&warp_frame(&f, &t), &t.inverse());
        // Only pixels whose round trip never left the source are comparable.
        for y in 8..32 {
            for x in 8..40 {
                assert!((back.get(x, y) - f.get(x, y)).abs() <= 2.0, "({x},{y})");
            }
        }
    }

    proptest! {
        #[test]
        fn inverse_round_trips(angle in -3.0f64..3.0, tx in -50.0f64..50.0, ty in -50.0f64..50.0,
                               px in -100.0f64..100.0, py in -100.0f64..100.0) {
            let t = RigidTransform { angle, tx, ty, center: Point::new(31.5, 20.0) };
            let p = Point::new(px, py);
            let q = t.inverse().apply(t.apply(p));
            prop_assert!(q.distance(p) < 1e-9);
        }

        #[test]
        fn exact_on_noise_free_correspondences(angle_deg in -30.0f64..30.0, tx in -20.0f64..20.0, ty in -20.0f64..20.0) {
            let center = Point::new(128.0, 96.0);
            let truth = RigidTransform { angle: angle_deg.to_radians(), tx, ty, center };
            let pairs: Vec<_> = cloud().into_iter().map(|p| (p, truth.apply(p))).collect();
            let est = estimate_transform(&pairs, center).unwrap();
            for (a, b) in &pairs {
                prop_assert!(est.apply(*a).distance(*b) < 1e-9);
            }
        }
    }
}
