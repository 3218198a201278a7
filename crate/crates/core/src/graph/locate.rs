//! Point location through a uniform bucket grid over triangle bounding boxes.

use super::{DelaunayGraph, Point};

/// Barycentric tolerance for points on triangle sides.
const BARY_SLACK: f64 = 1e-10;

/// A point located inside the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    /// Weights of the triangle's corners, in vertex order; they sum to one.
    pub bary: [f64; 3],
}

#[derive(Debug)]
pub(crate) struct Locator {
    cells: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    pub(crate) fn new(graph: &DelaunayGraph) -> Self {
        let cells = ((graph.num_triangles() as f64 / 2.0).sqrt().ceil() as usize).clamp(1, 1024);
        let mut buckets = vec![Vec::new(); cells * cells];
        for (t, tri) in graph.triangles().iter().enumerate() {
            let pts = tri.vertices.map(|v| graph.point(v));
            let lo = [0, 1].map(|k| pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min));
            let hi = [0, 1].map(|k| pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max));
            let (x0, y0) = (cell_of(lo[0], cells), cell_of(lo[1], cells));
            let (x1, y1) = (cell_of(hi[0], cells), cell_of(hi[1], cells));
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    buckets[cy * cells + cx].push(t);
                }
            }
        }
        Locator { cells, buckets }
    }

    pub(crate) fn locate(&self, graph: &DelaunayGraph, p: Point) -> Option<Location> {
        if !p[0].is_finite() || !p[1].is_finite() {
            return None;
        }
        let (cx, cy) = (cell_of(p[0], self.cells), cell_of(p[1], self.cells));
        let mut best: Option<(f64, Location)> = None;
        for &t in &self.buckets[cy * self.cells + cx] {
            let tri = graph.triangle(t);
            let bary = barycentric(tri.vertices.map(|v| graph.point(v)), p);
            let worst = bary.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= 0.0 {
                return Some(Location { triangle: t, bary });
            }
            if worst >= -BARY_SLACK && best.as_ref().is_none_or(|(w, _)| worst > *w) {
                best = Some((worst, Location { triangle: t, bary }));
            }
        }
        best.map(|(_, loc)| loc)
    }
}

fn cell_of(x: f64, cells: usize) -> usize {
    ((x * cells as f64).floor().max(0.0) as usize).min(cells - 1)
}

fn barycentric(corners: [Point; 3], p: Point) -> [f64; 3] {
    let [a, b, c] = corners;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((b[0] - p[0]) * (c[1] - p[1]) - (c[0] - p[0]) * (b[1] - p[1])) / det;
    let l2 = ((c[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (c[1] - p[1])) / det;
    [l1, l2, 1.0 - l1 - l2]
}
