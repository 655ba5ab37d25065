//! Frame rasters and the per-frame enhancement primitives: Gaussian blur,
//! contrast stretch, unsharp masking, Otsu binarization and histogram
//! equalization.
//!
//! Pixels are stored as `f64` in `[0, 255]`. Values are quantized to 8 bits
//! only when a histogram is built or a frame is written to disk, so chains of
//! filters do not accumulate rounding error.

use crate::error::{Error, Result};

/// Smallest width or height the pipeline accepts.
pub const MIN_FRAME_SIDE: usize = 16;

/// Mid-gray pivot used by [`adjust_contrast`].
pub const CONTRAST_PIVOT: f64 = 128.0;

/// A row-major grayscale intensity raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Frame {
    /// Builds a frame from row-major pixels, validating dimensions and range.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(Error::param(format!(
                "pixel buffer has {} values, expected {}x{}={}",
                pixels.len(),
                width,
                height,
                width * height
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::param(format!(
                "pixel value {bad} outside [0, 255]"
            )));
        }
        Ok(Frame {
            width,
            height,
            pixels,
        })
    }

    /// A frame with every pixel set to `value`.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Frame::new(width, height, vec![value; width * height])
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel. Results are
    /// clamped into `[0, 255]`; NaN maps to 0.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(clamp_intensity(f(x, y)));
            }
        }
        Ok(Frame {
            width,
            height,
            pixels,
        })
    }

    /// Builds a frame from 8-bit samples.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Frame::new(width, height, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Sets a pixel, clamping the value into range.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.pixels[y * self.width + x] = clamp_intensity(value);
    }

    /// Edge-clamped read with signed coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[yc * self.width + xc]
    }

    /// Bilinear sample at a sub-pixel position, or `None` outside
    /// `[0, width-1] x [0, height-1]`.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        sample_bilinear(&self.pixels, self.width, self.height, x, y)
    }

    /// 8-bit quantization used for histograms and file output.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| quantize(v)).collect()
    }

    /// 256-bin histogram of the quantized frame.
    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &v in &self.pixels {
            hist[quantize(v) as usize] += 1;
        }
        hist
    }

    /// Applies `f` to every pixel, clamping the result.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| clamp_intensity(f(v))).collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub(crate) fn from_raw_unchecked(width: usize, height: usize, pixels: Vec<f64>) -> Frame {
        debug_assert_eq!(pixels.len(), width * height);
        Frame {
            width,
            height,
            pixels,
        }
    }
}

/// A row-major binary raster (`true` = foreground).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFrame {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryFrame {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::param(format!(
                "bit buffer has {} values, expected {}",
                bits.len(),
                width * height
            )));
        }
        Ok(BinaryFrame { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryFrame { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Renders the mask as a 0/255 intensity frame.
    pub fn to_frame(&self) -> Result<Frame> {
        Frame::new(
            self.width,
            self.height,
            self.bits.iter().map(|&b| if b { 255.0 } else { 0.0 }).collect(),
        )
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
        return Err(Error::param(format!(
            "frame {width}x{height} is smaller than the {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE} minimum"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn clamp_intensity(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 255.0)
    }
}

/// Rounds an intensity to the nearest 8-bit level.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Bilinear interpolation on a raw row-major buffer. Positions must lie in
/// `[0, width-1] x [0, height-1]`.
#[inline]
pub(crate) fn sample_bilinear(data: &[f64], width: usize, height: usize, x: f64, y: f64) -> Option<f64> {
    if !(x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64) {
        return None;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let row0 = y0 * width;
    let row1 = y1 * width;
    let top = if fx == 0.0 {
        data[row0 + x0]
    } else {
        data[row0 + x0] * (1.0 - fx) + data[row0 + x1] * fx
    };
    if fy == 0.0 {
        return Some(top);
    }
    let bottom = if fx == 0.0 {
        data[row1 + x0]
    } else {
        data[row1 + x0] * (1.0 - fx) + data[row1 + x1] * fx
    };
    Some(top * (1.0 - fy) + bottom * fy)
}

/// Normalized 1-D Gaussian kernel of radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param(format!("gaussian sigma must be positive and finite, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= sum;
    }
    Ok(kernel)
}

/// Separable 1-D convolution along rows then columns with edge clamping.
pub(crate) fn convolve_separable(data: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as isize;
    let w = width as isize;
    let h = height as isize;
    let mut tmp = vec![0.0; data.len()];
    for y in 0..height {
        let row = &data[y * width..(y + 1) * width];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kw) in kernel.iter().enumerate() {
                let sx = (x + k as isize - radius).clamp(0, w - 1) as usize;
                acc += kw * row[sx];
            }
            tmp[y * width + x as usize] = acc;
        }
    }
    let mut out = vec![0.0; data.len()];
    for y in 0..h {
        for (k, &kw) in kernel.iter().enumerate() {
            let sy = (y + k as isize - radius).clamp(0, h - 1) as usize;
            let src = &tmp[sy * width..(sy + 1) * width];
            let dst = &mut out[y as usize * width..(y as usize + 1) * width];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += kw * s;
            }
        }
    }
    out
}

/// Separable Gaussian blur with edge-clamped borders.
pub fn gaussian_blur(frame: &Frame, sigma: f64) -> Result<Frame> {
    let kernel = gaussian_kernel(sigma)?;
    let mut out = convolve_separable(&frame.pixels, frame.width, frame.height, &kernel);
    for v in &mut out {
        *v = clamp_intensity(*v);
    }
    Ok(Frame::from_raw_unchecked(frame.width, frame.height, out))
}

/// Linear contrast stretch about mid-gray: `128 + gain * (v - 128)`, clamped.
pub fn adjust_contrast(frame: &Frame, gain: f64) -> Result<Frame> {
    if !(gain.is_finite() && gain >= 1.0) {
        return Err(Error::param(format!("contrast gain must be >= 1, got {gain}")));
    }
    Ok(frame.map(|v| CONTRAST_PIVOT + gain * (v - CONTRAST_PIVOT)))
}

/// Unsharp masking.
///
/// The blurred frame is subtracted from the original to form the mask; the
/// mask magnitude, normalized to `[0, 1]`, is the per-pixel luminosity that
/// blends a high-contrast copy of the frame (luminosity 1) with the original
/// (luminosity 0).
pub fn unsharp_mask(frame: &Frame, sigma: f64, contrast_gain: f64) -> Result<Frame> {
    let blurred = gaussian_blur(frame, sigma)?;
    let high = adjust_contrast(frame, contrast_gain)?;
    let pixels = frame
        .pixels
        .iter()
        .zip(&blurred.pixels)
        .zip(&high.pixels)
        .map(|((&orig, &blur), &hc)| {
            let lum = ((orig - blur).abs() / 255.0).clamp(0.0, 1.0);
            clamp_intensity(lum * hc + (1.0 - lum) * orig)
        })
        .collect();
    Ok(Frame::from_raw_unchecked(frame.width, frame.height, pixels))
}

/// Otsu's threshold on the 256-bin histogram of the quantized frame.
///
/// Returns the level `t` maximizing the between-class variance of the split
/// `{<= t} | {> t}`; the smallest maximizer wins ties. A frame with a single
/// quantized level has no separating threshold.
pub fn otsu_threshold(frame: &Frame) -> Result<u8> {
    let hist = frame.histogram();
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Degenerate(
            "otsu threshold needs at least two distinct intensity levels".into(),
        ));
    }
    let total: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(i, &c)| i as u64 * c).sum();

    let mut best_t = 0u8;
    let mut best = f64::NEG_INFINITY;
    let mut n0 = 0u64;
    let mut s0 = 0u64;
    for t in 0..255usize {
        n0 += hist[t];
        s0 += t as u64 * hist[t];
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s1 = total_sum - s0;
        // n0*n1*(mu0 - mu1)^2 = (s0*n1 - s1*n0)^2 / (n0*n1), exact up to the
        // final two roundings.
        let diff = s0 as i128 * n1 as i128 - s1 as i128 * n0 as i128;
        let diff = diff as f64;
        let score = diff * diff / (n0 as f64 * n1 as f64);
        if score > best {
            best = score;
            best_t = t as u8;
        }
    }
    Ok(best_t)
}

/// `bit = frame > threshold` (strict).
pub fn binarize(frame: &Frame, threshold: f64) -> Result<BinaryFrame> {
    if !(0.0..=255.0).contains(&threshold) {
        return Err(Error::param(format!("threshold {threshold} outside [0, 255]")));
    }
    Ok(BinaryFrame {
        width: frame.width,
        height: frame.height,
        bits: frame.pixels.iter().map(|&v| v > threshold).collect(),
    })
}

/// Histogram equalization by CDF remapping of the quantized levels.
/// A single-level frame is returned unchanged.
pub fn histogram_equalize(frame: &Frame) -> Frame {
    let hist = frame.histogram();
    let n = frame.pixels.len() as u64;
    let mut cdf = [0u64; 256];
    let mut acc = 0;
    for (c, &h) in cdf.iter_mut().zip(&hist) {
        acc += h;
        *c = acc;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if n == cdf_min {
        return frame.clone();
    }
    let denom = (n - cdf_min) as f64;
    let lut: Vec<f64> = cdf
        .iter()
        .map(|&c| (255.0 * (c.saturating_sub(cdf_min)) as f64 / denom).round())
        .collect();
    Frame::from_raw_unchecked(
        frame.width,
        frame.height,
        frame.pixels.iter().map(|&v| lut[quantize(v) as usize]).collect(),
    )
}
