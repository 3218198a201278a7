//! Signed-distance initialization of the level-set coefficients.
//!
//! Coefficients are negative strictly inside a contour, positive outside and
//! zero on it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{distance, DelaunayGraph, Point, VertexSet};
use crate::error::{Error, Result};

/// Distance below which a vertex is considered to lie on the contour.
const ON_CURVE: f64 = 1e-12;

/// A closed, simple polygon inside the unit square.
///
/// The vertex list must repeat its first point at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 4 {
            return Err(Error::InvalidContour(format!(
                "a closed polygon needs at least 3 distinct vertices plus closure, got {} points",
                vertices.len()
            )));
        }
        if vertices.first() != vertices.last() {
            return Err(Error::InvalidContour("polygon is open (first and last points differ)".into()));
        }
        for p in &vertices {
            if !(-1e-9..=1.0 + 1e-9).contains(&p[0]) || !(-1e-9..=1.0 + 1e-9).contains(&p[1]) {
                return Err(Error::InvalidContour(format!(
                    "vertex ({}, {}) lies outside the unit square",
                    p[0], p[1]
                )));
            }
        }
        let poly = Polygon { vertices };
        poly.check_simple()?;
        Ok(poly)
    }

    /// Closes the ring automatically when the last point differs from the first.
    pub fn closed(mut vertices: Vec<Point>) -> Result<Self> {
        if let (Some(first), Some(last)) = (vertices.first().copied(), vertices.last()) {
            if first != *last {
                vertices.push(first);
            }
        }
        Polygon::new(vertices)
    }

    /// Regular `segments`-gon approximating a circle.
    pub fn circle(center: Point, radius: f64, segments: usize) -> Result<Self> {
        let mut v: Vec<Point> = (0..segments)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / segments as f64;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            })
            .collect();
        v.push(v[0]);
        Polygon::new(v)
    }

    /// Closed vertex ring (first point repeated at the end).
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    /// Even-odd containment test; boundary points are reported as outside.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.segments() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside && self.distance(p) > ON_CURVE
    }

    /// Euclidean distance from `p` to the polygon boundary.
    pub fn distance(&self, p: Point) -> f64 {
        self.segments()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest parameter `t` in `[0, 1]` at which segment `p -> q` meets the boundary.
    fn first_crossing(&self, p: Point, q: Point) -> Option<f64> {
        self.segments()
            .filter_map(|(a, b)| segment_intersection(p, q, a, b))
            .fold(None, |best: Option<f64>, t| Some(best.map_or(t, |b| b.min(t))))
    }

    fn check_simple(&self) -> Result<()> {
        let segs: Vec<(Point, Point)> = self.segments().collect();
        let k = segs.len();
        for i in 0..k {
            for j in i + 2..k {
                if i == 0 && j == k - 1 {
                    continue;
                }
                let (a, b) = segs[i];
                let (c, d) = segs[j];
                if segments_cross(a, b, c, d) {
                    return Err(Error::InvalidContour(format!("polygon self-intersects (segments {i} and {j})")));
                }
            }
        }
        Ok(())
    }
}

/// How distances to the contour are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMethod {
    /// Euclidean on grid graphs, graph geodesic otherwise.
    #[default]
    Auto,
    /// Exact Euclidean distance to the polygon segments.
    Euclidean,
    /// Shortest paths along edges with Euclidean lengths, seeded where edges
    /// cross the contour.
    GraphGeodesic,
}

/// Signed distance to the union of `polygons`, evaluated at every vertex.
pub fn signed_distance_init(graph: &DelaunayGraph, polygons: &[Polygon]) -> Result<Vec<f64>> {
    signed_distance_with(graph, polygons, DistanceMethod::Auto)
}

pub fn signed_distance_with(graph: &DelaunayGraph, polygons: &[Polygon], method: DistanceMethod) -> Result<Vec<f64>> {
    if polygons.is_empty() {
        return Err(Error::InvalidContour("no polygon given".into()));
    }
    let n = graph.num_vertices();
    let euclid: Vec<f64> = graph
        .points()
        .iter()
        .map(|&p| polygons.iter().map(|poly| poly.distance(p)).fold(f64::INFINITY, f64::min))
        .collect();
    let on_curve: Vec<bool> = euclid.iter().map(|&d| d <= ON_CURVE).collect();
    let inside: Vec<bool> = graph
        .points()
        .iter()
        .zip(&on_curve)
        .map(|(&p, &on)| !on && polygons.iter().any(|poly| poly.contains(p)))
        .collect();

    let use_graph = match method {
        DistanceMethod::Auto => graph.grid_shape().is_none(),
        DistanceMethod::Euclidean => false,
        DistanceMethod::GraphGeodesic => true,
    };
    let magnitude = if use_graph {
        let mut seeds = vec![f64::INFINITY; n];
        for v in 0..n {
            if on_curve[v] {
                seeds[v] = 0.0;
            }
        }
        for &(u, v) in graph.edges() {
            if inside[u] == inside[v] || on_curve[u] || on_curve[v] {
                continue;
            }
            let (pu, pv) = (graph.point(u), graph.point(v));
            let len = distance(pu, pv);
            let t = polygons
                .iter()
                .filter_map(|poly| poly.first_crossing(pu, pv))
                .fold(None, |best: Option<f64>, t| Some(best.map_or(t, |b| b.min(t))))
                .unwrap_or(0.5);
            seeds[u] = seeds[u].min(t * len);
            seeds[v] = seeds[v].min((1.0 - t) * len);
        }
        let mut dist = dijkstra(graph, seeds);
        // Unreached vertices (no crossing at all, or a disconnected piece).
        for (d, &e) in dist.iter_mut().zip(&euclid) {
            if !d.is_finite() {
                *d = e;
            }
        }
        dist
    } else {
        euclid
    };

    Ok((0..n)
        .map(|v| {
            if on_curve[v] {
                0.0
            } else if inside[v] {
                -magnitude[v]
            } else {
                magnitude[v]
            }
        })
        .collect())
}

/// Signed graph distance to the boundary of a vertex mask.
///
/// The contour is placed at the midpoints of edges joining `inside` to its
/// complement; inside vertices get negative values.
pub fn signed_distance_from_mask(graph: &DelaunayGraph, inside: &VertexSet) -> Vec<f64> {
    let n = graph.num_vertices();
    let mut seeds = vec![f64::INFINITY; n];
    for &(u, v) in graph.edges() {
        if inside.contains(u) != inside.contains(v) {
            let half = 0.5 * graph.edge_length(u, v);
            seeds[u] = seeds[u].min(half);
            seeds[v] = seeds[v].min(half);
        }
    }
    let dist = dijkstra(graph, seeds);
    // Uniform masks have no contour; use the largest domain extent.
    dist.into_iter()
        .enumerate()
        .map(|(v, d)| {
            let d = if d.is_finite() { d } else { std::f64::consts::SQRT_2 };
            if inside.contains(v) {
                -d
            } else {
                d
            }
        })
        .collect()
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(graph: &DelaunayGraph, mut dist: Vec<f64>) -> Vec<f64> {
    let mut heap: BinaryHeap<Entry> = dist
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_finite())
        .map(|(v, &d)| Entry(d, v))
        .collect();
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &w in graph.neighbors(v) {
            let nd = d + graph.edge_length(v, w);
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry(nd, w));
            }
        }
    }
    dist
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    distance(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Parameter along `p -> q` where it meets segment `a -> b`, if it does.
fn segment_intersection(p: Point, q: Point, a: Point, b: Point) -> Option<f64> {
    let r = [q[0] - p[0], q[1] - p[1]];
    let s = [b[0] - a[0], b[1] - a[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs() < 1e-300 {
        return None;
    }
    let ap = [a[0] - p[0], a[1] - p[1]];
    let t = (ap[0] * s[1] - ap[1] * s[0]) / denom;
    let u = (ap[0] * r[1] - ap[1] * r[0]) / denom;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some(t)
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_grid_graph;

    fn unit_square() -> Polygon {
        Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]).unwrap()
    }

    #[test]
    fn polygon_validation() {
        assert!(matches!(
            Polygon::new(vec![[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]]),
            Err(Error::InvalidContour(_))
        ));
        assert!(Polygon::new(vec![[0.1, 0.1], [0.9, 0.1], [0.5, 0.9], [0.2, 0.2]]).is_err());
        // Bow tie.
        assert!(Polygon::new(vec![[0.1, 0.1], [0.9, 0.9], [0.9, 0.1], [0.1, 0.9], [0.1, 0.1]]).is_err());
        assert!(Polygon::closed(vec![[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]]).is_ok());
    }

    #[test]
    fn whole_domain_square_is_inside() {
        let g = build_grid_graph(6, 6).unwrap();
        let c = signed_distance_init(&g, &[unit_square()]).unwrap();
        for r in 0..6 {
            for col in 0..6 {
                let v = r * 6 + col;
                let border = r == 0 || col == 0 || r == 5 || col == 5;
                if border {
                    assert_eq!(c[v], 0.0);
                } else {
                    assert!(c[v] < 0.0);
                }
            }
        }
        let geo = signed_distance_with(&g, &[unit_square()], DistanceMethod::GraphGeodesic).unwrap();
        assert!(geo.iter().zip(&c).all(|(a, b)| a.signum() == b.signum() || (*a == 0.0 && *b == 0.0)));
    }

    #[test]
    fn vertex_on_edge_is_zero() {
        let g = build_grid_graph(5, 5).unwrap();
        // Vertex 12 sits at (0.5, 0.5), on the left side of this square.
        let poly = Polygon::closed(vec![[0.5, 0.25], [0.75, 0.25], [0.75, 0.75], [0.5, 0.75]]).unwrap();
        let c = signed_distance_init(&g, &[poly]).unwrap();
        assert_eq!(c[12], 0.0);
    }

    #[test]
    fn sign_matches_point_in_polygon() {
        let g = build_grid_graph(20, 20).unwrap();
        let poly = Polygon::closed(vec![[0.2, 0.1], [0.85, 0.3], [0.6, 0.9], [0.35, 0.55], [0.1, 0.7]]).unwrap();
        for method in [DistanceMethod::Euclidean, DistanceMethod::GraphGeodesic] {
            let c = signed_distance_with(&g, std::slice::from_ref(&poly), method).unwrap();
            for (v, &p) in g.points().iter().enumerate() {
                if poly.distance(p) > 1e-9 {
                    assert_eq!(c[v] < 0.0, poly.contains(p), "vertex {v} method {method:?}");
                }
            }
        }
    }

    #[test]
    fn graph_geodesic_bounds_euclidean() {
        let g = build_grid_graph(24, 24).unwrap();
        let poly = Polygon::circle([0.5, 0.5], 0.3, 64).unwrap();
        let e = signed_distance_with(&g, std::slice::from_ref(&poly), DistanceMethod::Euclidean).unwrap();
        let d = signed_distance_with(&g, std::slice::from_ref(&poly), DistanceMethod::GraphGeodesic).unwrap();
        for (a, b) in d.iter().zip(&e) {
            assert!(a.abs() + 1e-12 >= b.abs() - 1e-9);
        }
    }

    #[test]
    fn mask_distance_signs() {
        let g = build_grid_graph(8, 8).unwrap();
        let inside = VertexSet::from_indices(64, [27, 28, 35, 36]);
        let c = signed_distance_from_mask(&g, &inside);
        for v in 0..64 {
            assert_eq!(c[v] < 0.0, inside.contains(v));
            assert!(c[v] != 0.0);
        }
        let h = 1.0 / 7.0;
        assert!((c[27] + 0.5 * h).abs() < 1e-12);
    }
}
