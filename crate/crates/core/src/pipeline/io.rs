//! Frame files: binary PGM (P5) and 8-bit grayscale PNG.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imgproc::Frame;

/// Supported frame file formats, by extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<ImageFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" => Some(ImageFormat::Pgm),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::input(format!("{}: {msg}", path.display()))
}

/// Parses a binary PGM with maxval <= 255.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Frame> {
    let mut pos = 0;
    let mut token = || -> Option<&[u8]> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| &bytes[start..pos])
    };
    if token() != Some(b"P5".as_slice()) {
        return Err(bad(path, "not a binary PGM (P5)"));
    }
    let mut number = |name: &str| -> Result<usize> {
        token()
            .and_then(|t| std::str::from_utf8(t).ok())
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(path, format!("bad PGM {name}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(bad(path, format!("unsupported PGM maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width.checked_mul(height).ok_or_else(|| bad(path, "PGM dimensions overflow"))?;
    let raster = bytes.get(pos..pos + n).ok_or_else(|| bad(path, "truncated PGM raster"))?;
    let scale = 255.0 / maxval as f64;
    let pixels = raster.iter().map(|&b| (b as f64 * scale).min(255.0)).collect();
    Frame::new(width, height, pixels).map_err(|e| bad(path, e))
}

pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.to_u8());
    out
}

pub fn decode_png(bytes: &[u8], path: &Path) -> Result<Frame> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| bad(path, e))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(bad(path, format!("expected 8-bit grayscale PNG, got {:?} {:?}", info.color_type, info.bit_depth)));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader.output_buffer_size().ok_or_else(|| bad(path, "PNG too large"))?;
    let mut buf = vec![0; size];
    let frame_info = reader.next_frame(&mut buf).map_err(|e| bad(path, e))?;
    let row = frame_info.line_size;
    let mut packed = Vec::with_capacity(width * height);
    for y in 0..height {
        packed.extend_from_slice(&buf[y * row..y * row + width]);
    }
    Frame::from_u8(width, height, &packed).map_err(|e| bad(path, e))
}

pub fn encode_png(frame: &Frame) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, frame.width() as u32, frame.height() as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::input(format!("PNG encode: {e}")))?;
        writer
            .write_image_data(&frame.to_u8())
            .map_err(|e| Error::input(format!("PNG encode: {e}")))?;
    }
    Ok(out)
}

/// Reads one frame, choosing the decoder from the extension.
pub fn read_frame(path: &Path) -> Result<Frame> {
    let format = ImageFormat::from_path(path).ok_or_else(|| bad(path, "unsupported image format"))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        ImageFormat::Pgm => decode_pgm(&bytes, path),
        ImageFormat::Png => decode_png(&bytes, path),
    }
}

pub fn write_pgm(path: &Path, frame: &Frame) -> Result<()> {
    write_bytes(path, &encode_pgm(frame))
}

pub fn write_png(path: &Path, frame: &Frame) -> Result<()> {
    write_bytes(path, &encode_png(frame)?)
}

/// Writes by extension (`.pgm` or `.png`).
pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    match ImageFormat::from_path(path) {
        Some(ImageFormat::Pgm) => write_pgm(path, frame),
        Some(ImageFormat::Png) => write_png(path, frame),
        None => Err(bad(path, "unsupported image format")),
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Supported image files in `dir`, in strict lexicographic file-name order.
/// Other files are ignored.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && ImageFormat::from_path(&path).is_some() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if paths.len() < 2 {
        return Err(Error::input(format!(
            "{}: need at least 2 frames, found {}",
            dir.display(),
            paths.len()
        )));
    }
    Ok(paths)
}

/// Streams frames from a list of paths, checking every frame against the
/// dimensions of the first.
pub struct FrameReader {
    paths: std::vec::IntoIter<PathBuf>,
    dims: Option<(usize, usize)>,
}

impl FrameReader {
    pub fn new(paths: Vec<PathBuf>) -> Self {
        FrameReader {
            paths: paths.into_iter(),
            dims: None,
        }
    }

    pub fn open(dir: &Path) -> Result<Self> {
        Ok(FrameReader::new(list_frames(dir)?))
    }
}

impl Iterator for FrameReader {
    type Item = Result<(PathBuf, Frame)>;

    fn next(&mut self) -> Option<Self::Item> {
        let path = self.paths.next()?;
        Some(read_frame(&path).and_then(|frame| {
            let dims = (frame.width(), frame.height());
            match self.dims {
                None => self.dims = Some(dims),
                Some(expected) if expected != dims => {
                    return Err(bad(
                        &path,
                        format!("dimension mismatch: {}x{} vs {}x{}", dims.0, dims.1, expected.0, expected.1),
                    ))
                }
                Some(_) => {}
            }
            Ok((path, frame))
        }))
    }
}

/// Loads a whole directory (see [`FrameReader`] for the streaming form).
pub fn load_frames(dir: &Path) -> Result<Vec<Frame>> {
    FrameReader::open(dir)?.map(|r| r.map(|(_, f)| f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Frame {
        Frame::from_fn(20, 17, |x, y| ((x * 7 + y * 3) % 256) as f64).unwrap()
    }

    #[test]
    fn pgm_round_trip() {
        let f = ramp();
        let back = decode_pgm(&encode_pgm(&f), Path::new("x.pgm")).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn pgm_with_comment_and_low_maxval() {
        let mut bytes = b"P5\n# comment\n2 1\n15\n".to_vec();
        bytes.extend([0u8, 15]);
        let f = decode_pgm(&bytes, Path::new("x.pgm"));
        // Too small for a pipeline frame.
        assert!(f.is_err());
        let mut bytes = b"P5 16 16 15 ".to_vec();
        bytes.extend(std::iter::repeat_n(15u8, 256));
        let f = decode_pgm(&bytes, Path::new("x.pgm")).unwrap();
        assert_eq!(f.get(3, 3), 255.0);
    }

    #[test]
    fn pgm_rejects_garbage() {
        assert!(decode_pgm(b"P2 16 16 255 ", Path::new("x.pgm")).is_err());
        assert!(decode_pgm(b"P5 16 16 255 abc", Path::new("x.pgm")).is_err());
        assert!(decode_pgm(b"P5 16 16 65535 ", Path::new("x.pgm")).is_err());
    }

    #[test]
    fn png_round_trip() {
        let f = ramp();
        let back = decode_png(&encode_png(&f).unwrap(), Path::new("x.png")).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn format_by_extension() {
        assert_eq!(ImageFormat::from_path(Path::new("a/b.PGM")), Some(ImageFormat::Pgm));
        assert_eq!(ImageFormat::from_path(Path::new("a.png")), Some(ImageFormat::Png));
        assert_eq!(ImageFormat::from_path(Path::new("a.jpg")), None);
    }
}
