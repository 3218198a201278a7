//! Random point subsets of an image and the mapping back to pixels.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{delaunay_triangulate, DelaunayGraph, Point};
use crate::io::pnm::Image;
use crate::io::seeds::Trimap;
use crate::metrics::SegmentationMask;
use crate::models::FeatureField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleMode {
    /// Uniform random positions plus the four image corners.
    #[default]
    Uniform,
    /// Every pixel centre; only valid when `N` equals the pixel count.
    Grid,
}

/// Graph over sampled points with features from the nearest pixels.
#[derive(Debug, Clone)]
pub struct SampledGraph {
    pub graph: DelaunayGraph,
    pub features: FeatureField,
    /// Nearest pixel (row-major index) of every vertex.
    pub pixels: Vec<usize>,
}

/// Pixel spacing of an image placed like [`crate::graph::build_grid_graph`].
pub fn pixel_spacing(width: usize, height: usize) -> f64 {
    1.0 / (width.max(height).max(2) - 1) as f64
}

fn nearest_pixel(p: Point, width: usize, height: usize, h: f64) -> usize {
    let x = ((p[0] / h).round().max(0.0) as usize).min(width - 1);
    let y = ((p[1] / h).round().max(0.0) as usize).min(height - 1);
    y * width + x
}

/// Samples `n` points over the image extent, adds its corners and
/// triangulates; features are the colours of the nearest pixels.
pub fn subsample_to_graph<R: Rng>(image: &Image, n: usize, mode: SampleMode, rng: &mut R) -> Result<SampledGraph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("at least 3 sample points are required, got {n}")));
    }
    let (w, hgt) = (image.width(), image.height());
    if mode == SampleMode::Grid {
        if n != image.num_pixels() {
            return Err(Error::InvalidParameter(format!(
                "grid sampling needs exactly {} points, got {n}",
                image.num_pixels()
            )));
        }
        let (graph, features) = image.to_grid()?;
        return Ok(SampledGraph {
            graph,
            features,
            pixels: (0..n).collect(),
        });
    }
    let h = pixel_spacing(w, hgt);
    let (xmax, ymax) = ((w - 1) as f64 * h, (hgt - 1) as f64 * h);
    let mut points: Vec<Point> = vec![[0.0, 0.0], [xmax, 0.0], [0.0, ymax], [xmax, ymax]];
    points.extend((0..n).map(|_| [rng.random::<f64>() * xmax, rng.random::<f64>() * ymax]));
    let graph = delaunay_triangulate(&points)?;
    let pixels: Vec<usize> = graph.points().iter().map(|&p| nearest_pixel(p, w, hgt, h)).collect();
    let ch = image.channels();
    let values = pixels
        .iter()
        .flat_map(|&px| image.data()[px * ch..(px + 1) * ch].iter().map(|&b| b as f64 / 255.0))
        .collect();
    let features = FeatureField::new(&graph, ch, values)?;
    Ok(SampledGraph { graph, features, pixels })
}

impl SampledGraph {
    /// Trimap codes of the nearest pixels.
    pub fn vertex_trimap(&self, trimap: &Trimap) -> Result<Trimap> {
        let codes = self.pixels.iter().map(|&p| trimap.codes()[p]).collect();
        Trimap::new(self.pixels.len(), 1, codes)
    }

    /// Pixel mask by barycentric interpolation of the vertex labels,
    /// foreground where the interpolant reaches one half.
    pub fn rasterize(&self, mask: &SegmentationMask, width: usize, height: usize) -> Result<SegmentationMask> {
        if mask.len() != self.graph.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: self.graph.num_vertices(),
                found: mask.len(),
            });
        }
        let h = pixel_spacing(width, height);
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let p = [x as f64 * h, y as f64 * h];
                let loc = self.graph.locate(p).ok_or(Error::OutOfDomain { x: p[0], y: p[1] })?;
                let t = self.graph.triangle(loc.triangle);
                let value: f64 = (0..3).map(|k| loc.bary[k] * mask.is_foreground(t.vertices[k]) as u8 as f64).sum();
                labels.push(value >= 0.5);
            }
        }
        Ok(SegmentationMask::new(labels))
    }
}
