//! Linear RGB raster and binary PPM (P6) encoding.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::color::Rgb;

#[derive(Clone, Debug, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    data: Vec<Rgb>,
}

impl ImageRgb {
    /// # Panics
    ///
    /// Panics on a zero dimension.
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be at least 1x1");
        Self { width, height, data: vec![color; width * height] }
    }

    /// # Panics
    ///
    /// Panics if `data.len() != width * height` or a dimension is zero.
    pub fn from_data(width: usize, height: usize, data: Vec<Rgb>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be at least 1x1");
        assert_eq!(data.len(), width * height, "pixel count does not match dimensions");
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[Rgb] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.data[y * self.width + x] = c;
    }

    pub fn same_size(&self, other: &ImageRgb) -> bool {
        self.width == other.width && self.height == other.height
    }
}

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected P6")]
    BadMagic,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// `round(clamp(c, 0, 1) * 255)`.
#[inline]
pub fn quantize(c: f32) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_ppm(img: &ImageRgb) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.data.len() * 3);
    out.extend_from_slice(header.as_bytes());
    for px in &img.data {
        out.extend_from_slice(&[quantize(px.r), quantize(px.g), quantize(px.b)]);
    }
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<ImageRgb, PpmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(PpmError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        let start_ws = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos == start_ws {
            return Err(PpmError::MalformedHeader(format!("missing whitespace before field {i}")));
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(PpmError::MalformedHeader(format!("expected a number for field {i}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| PpmError::MalformedHeader(format!("number out of range: {text}")))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(PpmError::MalformedHeader("zero dimension".into()));
    }
    if maxval != 255 {
        return Err(PpmError::MalformedHeader(format!("unsupported maxval {maxval}")));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PpmError::MalformedHeader("missing separator after maxval".into()));
    }
    pos += 1;

    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| PpmError::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(PpmError::Truncated { expected, found: payload.len() });
    }
    let data = payload[..expected]
        .chunks_exact(3)
        .map(|p| Rgb::new(p[0] as f32 / 255.0, p[1] as f32 / 255.0, p[2] as f32 / 255.0))
        .collect();
    Ok(ImageRgb::from_data(width, height, data))
}

pub fn write_ppm(img: &ImageRgb, path: impl AsRef<Path>) -> Result<(), PpmError> {
    fs::write(path, encode_ppm(img))?;
    Ok(())
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<ImageRgb, PpmError> {
    decode_ppm(&fs::read(path)?)
}
