//! Phase 2: blob extraction.
//!
//! The frame is histogram-equalized, pixels inside an inclusive intensity
//! band become foreground, foreground is split into connected regions, and
//! each region is measured (area, centroid, Chebyshev radius, crack
//! perimeter, Heywood circularity) and kept only if it passes the area and
//! circularity bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::imgproc::{histogram_equalize, BinaryFrame, Frame};

/// Pixel adjacency used for labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

/// A measured connected region.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub label: u32,
    pub area: usize,
    pub centroid: Point,
    /// Largest Chebyshev distance from the centroid to a member pixel
    /// (at least 0.5).
    pub radius: f64,
    /// Count of pixel edges shared with background or the frame border.
    pub perimeter: usize,
    /// Heywood factor `perimeter / (2 sqrt(π area))`.
    pub circularity: f64,
}

/// Blob acceptance bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobFilterConfig {
    pub min_area: f64,
    pub max_area: f64,
    pub intensity_lo: f64,
    pub intensity_hi: f64,
    pub max_circularity: f64,
    pub connectivity: Connectivity,
}

impl Default for BlobFilterConfig {
    fn default() -> Self {
        BlobFilterConfig::for_grid_spacing(16)
    }
}

impl BlobFilterConfig {
    /// Default bounds with the maximum area set to the circle of radius
    /// `d / 2` for grid spacing `d`.
    pub fn for_grid_spacing(d: usize) -> Self {
        BlobFilterConfig {
            min_area: 9.0,
            max_area: max_area_for_spacing(d),
            intensity_lo: 0.0,
            intensity_hi: 125.0,
            max_circularity: 1.5,
            connectivity: Connectivity::Eight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.intensity_lo && self.intensity_lo < self.intensity_hi && self.intensity_hi <= 255.0) {
            return Err(Error::param(format!(
                "intensity band [{}, {}] must satisfy 0 <= lo < hi <= 255",
                self.intensity_lo, self.intensity_hi
            )));
        }
        if !(self.min_area >= 0.0 && self.min_area < self.max_area) {
            return Err(Error::param(format!(
                "area bounds [{}, {}] must satisfy 0 <= min < max",
                self.min_area, self.max_area
            )));
        }
        if !(self.max_circularity.is_finite() && self.max_circularity > 0.0) {
            return Err(Error::param("max_circularity must be positive"));
        }
        Ok(())
    }
}

/// `π (d/2)^2`.
pub fn max_area_for_spacing(d: usize) -> f64 {
    let r = d as f64 / 2.0;
    PI * r * r
}

/// `lo <= v <= hi`.
pub fn intensity_mask(frame: &Frame, lo: f64, hi: f64) -> Result<BinaryFrame> {
    if !(lo < hi) {
        return Err(Error::param(format!("intensity band [{lo}, {hi}] is empty")));
    }
    BinaryFrame::new(
        frame.width(),
        frame.height(),
        frame.pixels().iter().map(|&v| lo <= v && v <= hi).collect(),
    )
}

/// Dense region labels: 0 is background, regions are numbered from 1 in the
/// raster order of their first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub count: u32,
}

impl Labeling {
    /// Member pixels of every region, indexed by `label - 1`, each in raster
    /// order.
    pub fn regions(&self) -> Vec<Vec<(usize, usize)>> {
        let mut regions = vec![Vec::new(); self.count as usize];
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                regions[l as usize - 1].push((i % self.width, i / self.width));
            }
        }
        regions
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let ra = find(parent, a);
    let rb = find(parent, b);
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass union-find labeling.
pub fn connected_components(mask: &BinaryFrame, connectivity: Connectivity) -> Labeling {
    let (w, h) = (mask.width(), mask.height());
    let mut provisional = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];
    let prior: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (0, -1)],
        Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
    };
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut current = 0u32;
            for &(dx, dy) in prior {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize {
                    continue;
                }
                let l = provisional[ny as usize * w + nx as usize];
                if l == 0 {
                    continue;
                }
                if current == 0 {
                    current = l;
                } else {
                    union(&mut parent, current, l);
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            provisional[y * w + x] = current;
        }
    }
    // Final labels follow the raster order of each region's first pixel.
    let mut remap = vec![0u32; parent.len()];
    let mut count = 0u32;
    let mut labels = vec![0u32; w * h];
    for i in 0..w * h {
        let l = provisional[i];
        if l == 0 {
            continue;
        }
        let root = find(&mut parent, l) as usize;
        if remap[root] == 0 {
            count += 1;
            remap[root] = count;
        }
        labels[i] = remap[root];
    }
    Labeling {
        width: w,
        height: h,
        labels,
        count,
    }
}

/// Measures one region given its member pixels and the labeling it came
/// from.
pub fn blob_features(pixels: &[(usize, usize)], labeling: &Labeling, label: u32) -> Blob {
    let area = pixels.len();
    let (sx, sy) = pixels
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
    let centroid = Point::new(sx / area as f64, sy / area as f64);
    let (w, h) = (labeling.width, labeling.height);
    let inside = |x: isize, y: isize| {
        x >= 0 && y >= 0 && x < w as isize && y < h as isize && labeling.labels[y as usize * w + x as usize] == label
    };
    let mut perimeter = 0;
    let mut radius: f64 = 0.5;
    for &(x, y) in pixels {
        let (xi, yi) = (x as isize, y as isize);
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            if !inside(xi + dx, yi + dy) {
                perimeter += 1;
            }
        }
        radius = radius.max((x as f64 - centroid.x).abs().max((y as f64 - centroid.y).abs()));
    }
    Blob {
        label,
        area,
        centroid,
        radius,
        perimeter,
        circularity: heywood_circularity(perimeter as f64, area as f64),
    }
}

/// `perimeter / (2 sqrt(π area))`.
pub fn heywood_circularity(perimeter: f64, area: f64) -> f64 {
    perimeter / (2.0 * (PI * area).sqrt())
}

/// Keeps blobs with `min_area <= area <= max_area` and circularity at most
/// `max_circularity`, preserving order.
pub fn filter_blobs(blobs: Vec<Blob>, config: &BlobFilterConfig) -> Vec<Blob> {
    blobs
        .into_iter()
        .filter(|b| {
            let a = b.area as f64;
            config.min_area <= a && a <= config.max_area && b.circularity <= config.max_circularity
        })
        .collect()
}

/// Measures every region of a mask, in label order.
pub fn measure_regions(mask: &BinaryFrame, connectivity: Connectivity) -> Vec<Blob> {
    let labeling = connected_components(mask, connectivity);
    labeling
        .regions()
        .iter()
        .enumerate()
        .map(|(i, px)| blob_features(px, &labeling, i as u32 + 1))
        .collect()
}

/// Equalize, band-mask, label, measure and filter.
pub fn detect_blobs(frame: &Frame, config: &BlobFilterConfig) -> Result<Vec<Blob>> {
    config.validate()?;
    let equalized = histogram_equalize(frame);
    let mask = intensity_mask(&equalized, config.intensity_lo, config.intensity_hi)?;
    Ok(filter_blobs(measure_regions(&mask, config.connectivity), config))
}
