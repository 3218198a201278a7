//! Binary netpbm images: P5 (grey) and P6 (RGB), 8 bits per sample.

use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{build_grid_graph, DelaunayGraph};
use crate::models::FeatureField;

/// Row-major 8-bit image with 1 or 3 interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!("images have 1 or 3 channels, got {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch {
                expected: width * height * channels,
                found: data.len(),
            });
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Image::new(width, height, 1, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Image::new(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Samples scaled to `[0, 1]`, vertex-major.
    pub fn unit_values(&self) -> Vec<f64> {
        self.data.iter().map(|&b| b as f64 / 255.0).collect()
    }

    /// Grid graph with one vertex per pixel and the pixel colours as features.
    pub fn to_grid(&self) -> Result<(DelaunayGraph, FeatureField)> {
        let graph = build_grid_graph(self.height, self.width)?;
        let features = FeatureField::new(&graph, self.channels, self.unit_values())?;
        Ok((graph, features))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::format(self.path, self.pos, message)
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(self.path, start, format!("{what} out of range")))
    }
}

/// Parses a P5/P6 byte stream; `path` only labels errors.
pub fn parse_pnm(bytes: &[u8], path: &Path) -> Result<Image> {
    let mut cur = Cursor { bytes, pos: 0, path };
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some([b'P', d]) if d.is_ascii_digit() => {
            return Err(cur.error(format!("unsupported netpbm variant P{}; only binary P5 and P6 are read", *d as char)))
        }
        _ => return Err(cur.error("not a netpbm file")),
    };
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_space_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(path, maxval_at, format!("empty image {width}x{height}")));
    }
    if !(1..=255).contains(&maxval) {
        return Err(Error::format(path, maxval_at, format!("unsupported maxval {maxval}; only 8-bit samples are read")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.error("expected a single whitespace byte before the samples")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| cur.error("image dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < need {
        return Err(Error::format(
            path,
            bytes.len(),
            format!("truncated samples: expected {need} bytes, found {}", payload.len()),
        ));
    }
    let mut data = payload[..need].to_vec();
    if maxval != 255 {
        for (k, b) in data.iter_mut().enumerate() {
            if *b as usize > maxval {
                return Err(Error::format(path, cur.pos + k, format!("sample {} exceeds maxval {maxval}", *b)));
            }
            *b = ((*b as usize * 255 + maxval / 2) / maxval) as u8;
        }
    }
    Image::new(width, height, channels, data)
}

pub fn read_pnm(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pnm(&bytes, path)
}

pub fn encode_pnm(image: &Image) -> Vec<u8> {
    let magic = if image.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

pub fn write_pnm(path: &Path, image: &Image) -> Result<()> {
    std::fs::write(path, encode_pnm(image)).map_err(|e| Error::io(path, e))
}

/// Reads an image and builds its pixel grid graph and features.
pub fn load_image(path: &Path) -> Result<(Image, DelaunayGraph, FeatureField)> {
    let image = read_pnm(path)?;
    let (graph, features) = image.to_grid()?;
    Ok((image, graph, features))
}
