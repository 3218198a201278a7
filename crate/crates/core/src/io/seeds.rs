//! Trimap seeds and binary mask images.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gar::SeedLabeling;
use crate::graph::{DelaunayGraph, GridShape, Polygon, VertexSet};
use crate::io::pnm::{read_pnm, write_pnm, Image};
use crate::metrics::SegmentationMask;

pub const TRIMAP_BACKGROUND: u8 = 0;
pub const TRIMAP_UNKNOWN: u8 = 128;
pub const TRIMAP_FOREGROUND: u8 = 255;

/// Per-pixel seed codes: 0 background, 128 unknown, 255 foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimap {
    width: usize,
    height: usize,
    codes: Vec<u8>,
}

impl Trimap {
    pub fn new(width: usize, height: usize, codes: Vec<u8>) -> Result<Self> {
        if codes.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: codes.len(),
            });
        }
        let stray: Vec<usize> = codes
            .iter()
            .enumerate()
            .filter(|(_, &c)| !matches!(c, TRIMAP_BACKGROUND | TRIMAP_UNKNOWN | TRIMAP_FOREGROUND))
            .map(|(i, _)| i)
            .collect();
        if !stray.is_empty() {
            let shown: Vec<String> = stray
                .iter()
                .take(8)
                .map(|&i| format!("({}, {})={}", i % width, i / width, codes[i]))
                .collect();
            return Err(Error::InvalidParameter(format!(
                "trimap has {} pixels outside {{0, 128, 255}}: {}{}",
                stray.len(),
                shown.join(" "),
                if stray.len() > shown.len() { " ..." } else { "" }
            )));
        }
        Ok(Trimap { width, height, codes })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn code(&self, x: usize, y: usize) -> u8 {
        self.codes[y * self.width + x]
    }

    fn pixels_with(&self, code: u8) -> VertexSet {
        VertexSet::from_mask(self.codes.iter().map(|&c| c == code).collect())
    }

    /// Unknown pixels, where segmentations are evaluated.
    pub fn unknown(&self) -> VertexSet {
        self.pixels_with(TRIMAP_UNKNOWN)
    }

    /// Seeds on the pixel grid graph of the same image.
    pub fn to_seeds(&self, graph: &DelaunayGraph, roi: Option<Polygon>) -> Result<SeedLabeling> {
        if graph.num_vertices() != self.codes.len() {
            return Err(Error::DimensionMismatch {
                expected: graph.num_vertices(),
                found: self.codes.len(),
            });
        }
        SeedLabeling::new(
            graph,
            self.pixels_with(TRIMAP_FOREGROUND),
            self.pixels_with(TRIMAP_BACKGROUND),
            roi,
        )
    }
}

/// Reads a trimap and checks its size against `expected = (width, height)`.
pub fn read_trimap(path: &Path, expected: Option<(usize, usize)>) -> Result<Trimap> {
    let image = read_pnm(path)?;
    if image.channels() != 1 {
        return Err(Error::format(path, 0, "trimap must be a greyscale P5 image"));
    }
    if let Some((w, h)) = expected {
        if (image.width(), image.height()) != (w, h) {
            return Err(Error::format(
                path,
                0,
                format!("trimap is {}x{} but the image is {w}x{h}", image.width(), image.height()),
            ));
        }
    }
    Trimap::new(image.width(), image.height(), image.data().to_vec()).map_err(|e| match e {
        Error::InvalidParameter(m) => Error::format(path, 0, m),
        other => other,
    })
}

/// Mask as a greyscale image, 255 for foreground. Grid graphs keep their
/// shape; other graphs are written as one row of `N` pixels.
pub fn mask_to_image(mask: &SegmentationMask, shape: Option<GridShape>) -> Result<Image> {
    let (w, h) = match shape {
        Some(s) => (s.cols, s.rows),
        None => (mask.len(), 1),
    };
    let data = mask.labels().iter().map(|&f| if f { 255 } else { 0 }).collect();
    Image::gray(w, h, data)
}

pub fn write_mask(path: &Path, mask: &SegmentationMask, shape: Option<GridShape>) -> Result<()> {
    write_pnm(path, &mask_to_image(mask, shape)?)
}

/// Mask from a greyscale image: 255 is foreground, 0 background and any
/// other value marks the pixel as undefined.
pub fn image_to_mask(image: &Image) -> Result<SegmentationMask> {
    if image.channels() != 1 {
        return Err(Error::InvalidParameter("masks are greyscale images".into()));
    }
    let labels = image.data().iter().map(|&b| b == 255).collect();
    let valid: Vec<bool> = image.data().iter().map(|&b| b == 0 || b == 255).collect();
    if valid.iter().all(|&v| v) {
        Ok(SegmentationMask::new(labels))
    } else {
        SegmentationMask::with_validity(labels, valid)
    }
}

pub fn read_mask(path: &Path) -> Result<(SegmentationMask, Image)> {
    let image = read_pnm(path)?;
    let mask = image_to_mask(&image).map_err(|e| Error::format(path, 0, e.to_string()))?;
    Ok((mask, image))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_grid_graph;
    use crate::io::pnm::encode_pnm;

    #[test]
    fn hand_trimap_membership() {
        let t = Trimap::new(3, 3, vec![0, 0, 128, 255, 128, 0, 255, 255, 128]).unwrap();
        let g = build_grid_graph(3, 3).unwrap();
        let s = t.to_seeds(&g, None).unwrap();
        assert_eq!(s.foreground().iter().collect::<Vec<_>>(), vec![3, 6, 7]);
        assert_eq!(s.background().iter().collect::<Vec<_>>(), vec![0, 1, 5]);
        assert_eq!(s.undefined().iter().collect::<Vec<_>>(), vec![2, 4, 8]);
        assert_eq!(t.unknown().len(), 3);
    }

    #[test]
    fn stray_codes_are_listed() {
        let err = Trimap::new(2, 2, vec![0, 7, 128, 200]).unwrap_err().to_string();
        assert!(err.contains("2 pixels") && err.contains("(1, 0)=7") && err.contains("(1, 1)=200"), "{err}");
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.pgm");
        std::fs::write(&p, encode_pnm(&Image::gray(2, 2, vec![0, 128, 128, 255]).unwrap())).unwrap();
        assert!(read_trimap(&p, Some((2, 2))).is_ok());
        assert!(matches!(read_trimap(&p, Some((3, 2))), Err(Error::Format { .. })));
    }

    #[test]
    fn all_unknown_trimap_fails_training() {
        let g = build_grid_graph(2, 2).unwrap();
        let s = Trimap::new(2, 2, vec![128; 4]).unwrap().to_seeds(&g, None).unwrap();
        assert!(s.foreground().is_empty());
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let m = SegmentationMask::new(vec![true, false, false, true, true, false]);
        write_mask(&p, &m, Some(GridShape { rows: 2, cols: 3 })).unwrap();
        let (back, img) = read_mask(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!((img.width(), img.height()), (3, 2));
        write_mask(&p, &m, None).unwrap();
        let (back, img) = read_mask(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!((img.width(), img.height()), (6, 1));
    }

    #[test]
    fn undefined_ground_truth_pixels() {
        let img = Image::gray(3, 1, vec![0, 128, 255]).unwrap();
        let m = image_to_mask(&img).unwrap();
        assert_eq!(m.validity(), Some(&[true, false, true][..]));
    }
}
