//! Delaunay graphs.
//!
//! A [`DelaunayGraph`] is simultaneously the graph whose vertices carry the
//! data and the triangular finite-element mesh on which the level-set
//! equation is discretised. Vertices live in the unit square; every triangle
//! caches its area and the gradients of the three piecewise-linear nodal
//! basis functions restricted to it.

mod delaunay;
mod distance;
mod locate;
mod rcm;

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fem::element_gradients;

pub use delaunay::delaunay_triangulate;
pub use distance::{signed_distance_from_mask, signed_distance_init, signed_distance_with, DistanceMethod, Polygon};
pub use locate::Location;
pub use rcm::{bandwidth, rcm_order, rcm_order_local};

use locate::Locator;

/// A point in the plane.
pub type Point = [f64; 2];

/// Coordinate slack used when checking membership of the unit square.
const UNIT_SQUARE_SLACK: f64 = 1e-9;

/// Row/column shape of a graph built from a regular lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

/// A mesh triangle with cached geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    /// Vertex indices, counter-clockwise.
    pub vertices: [usize; 3],
    /// Area of the triangle.
    pub area: f64,
    /// Gradient of the nodal basis function of each corner on this triangle.
    pub gradients: [[f64; 2]; 3],
}

impl Triangle {
    /// Local corner (0..3) of global vertex `v`, if it is a corner.
    pub fn corner_of(&self, v: usize) -> Option<usize> {
        self.vertices.iter().position(|&w| w == v)
    }

    /// Gradient of the linear interpolant of nodal `values` on this triangle.
    pub fn gradient_of(&self, values: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (k, &v) in self.vertices.iter().enumerate() {
            g[0] += values[v] * self.gradients[k][0];
            g[1] += values[v] * self.gradients[k][1];
        }
        g
    }
}

/// A membership bitmask over the vertices of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VertexSet {
    bits: Vec<bool>,
    count: usize,
}

impl VertexSet {
    pub fn empty(n: usize) -> Self {
        VertexSet {
            bits: vec![false; n],
            count: 0,
        }
    }

    pub fn full(n: usize) -> Self {
        VertexSet {
            bits: vec![true; n],
            count: n,
        }
    }

    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = VertexSet::empty(n);
        for i in indices {
            set.insert(i);
        }
        set
    }

    pub fn from_mask(bits: Vec<bool>) -> Self {
        let count = bits.iter().filter(|&&b| b).count();
        VertexSet { bits, count }
    }

    /// Size of the underlying vertex universe.
    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, v: usize) -> bool {
        self.bits[v]
    }

    pub fn insert(&mut self, v: usize) -> bool {
        if self.bits[v] {
            return false;
        }
        self.bits[v] = true;
        self.count += 1;
        true
    }

    pub fn remove(&mut self, v: usize) -> bool {
        if !self.bits[v] {
            return false;
        }
        self.bits[v] = false;
        self.count -= 1;
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn complement(&self) -> VertexSet {
        VertexSet::from_mask(self.bits.iter().map(|b| !b).collect())
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        VertexSet::from_mask(self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect())
    }

    pub fn as_mask(&self) -> &[bool] {
        &self.bits
    }
}

/// Compressed adjacency-plus-diagonal pattern with per-triangle slot map,
/// shared by every matrix assembled on the full graph.
#[derive(Debug)]
pub(crate) struct CsrPattern {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    /// For triangle t, `slots[t][a][b]` is the storage index of entry
    /// (vertices[a], vertices[b]).
    pub slots: Vec<[[usize; 3]; 3]>,
}

/// Vertices, triangles and adjacency of a planar Delaunay graph.
#[derive(Debug)]
pub struct DelaunayGraph {
    points: Vec<Point>,
    triangles: Vec<Triangle>,
    neighbors: Vec<Vec<usize>>,
    incident: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    grid: Option<GridShape>,
    pattern: OnceLock<CsrPattern>,
    locator: OnceLock<Locator>,
}

impl Clone for DelaunayGraph {
    fn clone(&self) -> Self {
        DelaunayGraph {
            points: self.points.clone(),
            triangles: self.triangles.clone(),
            neighbors: self.neighbors.clone(),
            incident: self.incident.clone(),
            edges: self.edges.clone(),
            grid: self.grid,
            pattern: OnceLock::new(),
            locator: OnceLock::new(),
        }
    }
}

impl DelaunayGraph {
    /// Builds a graph from points and an explicit triangle list.
    ///
    /// Triangles are reoriented counter-clockwise. Points must lie in the
    /// unit square and every triangle must have positive area.
    pub fn from_triangles(points: Vec<Point>, triangles: &[[usize; 3]]) -> Result<Self> {
        let n = points.len();
        for p in &points {
            let inside = p.iter().all(|&x| (-UNIT_SQUARE_SLACK..=1.0 + UNIT_SQUARE_SLACK).contains(&x));
            if !inside {
                return Err(Error::DegenerateInput(format!(
                    "vertex ({}, {}) lies outside the unit square",
                    p[0], p[1]
                )));
            }
        }
        let mut tris = Vec::with_capacity(triangles.len());
        for (index, t) in triangles.iter().enumerate() {
            if let Some(&bad) = t.iter().find(|&&v| v >= n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: bad,
                });
            }
            let mut verts = *t;
            if signed_double_area(&points, verts) < 0.0 {
                verts.swap(1, 2);
            }
            let corners = verts.map(|v| points[v]);
            let gradients = element_gradients(&corners).map_err(|_| Error::DegenerateTriangle { index })?;
            let area = 0.5 * signed_double_area(&points, verts);
            tris.push(Triangle {
                vertices: verts,
                area,
                gradients,
            });
        }

        let mut neighbors = vec![Vec::new(); n];
        let mut incident = vec![Vec::new(); n];
        for (t, tri) in tris.iter().enumerate() {
            for k in 0..3 {
                let a = tri.vertices[k];
                let b = tri.vertices[(k + 1) % 3];
                neighbors[a].push(b);
                neighbors[b].push(a);
                incident[a].push(t);
            }
        }
        let mut edges = Vec::new();
        for (v, list) in neighbors.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            edges.extend(list.iter().filter(|&&w| w > v).map(|&w| (v, w)));
        }

        Ok(DelaunayGraph {
            points,
            triangles: tris,
            neighbors,
            incident,
            edges,
            grid: None,
            pattern: OnceLock::new(),
            locator: OnceLock::new(),
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, v: usize) -> Point {
        self.points[v]
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> &Triangle {
        &self.triangles[t]
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    /// Triangles having `v` as a corner.
    pub fn incident_triangles(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    /// Undirected edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn are_adjacent(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }

    /// Lattice shape, when the graph was built from a regular grid.
    pub fn grid_shape(&self) -> Option<GridShape> {
        self.grid
    }

    /// Total area of the triangulated domain.
    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| t.area).sum()
    }

    /// Sum of the areas of triangles incident to `v`.
    pub fn incident_area(&self, v: usize) -> f64 {
        self.incident[v].iter().map(|&t| self.triangles[t].area).sum()
    }

    pub fn edge_length(&self, u: usize, v: usize) -> f64 {
        distance(self.points[u], self.points[v])
    }

    /// Mean Euclidean edge length.
    pub fn mean_edge_length(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.edges.iter().map(|&(u, v)| self.edge_length(u, v)).sum();
        sum / self.edges.len() as f64
    }

    /// Number of triangles sharing each edge, in the order of [`edges`](Self::edges).
    pub fn edge_triangle_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.edges.len()];
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = ordered(tri.vertices[k], tri.vertices[(k + 1) % 3]);
                let idx = self.edge_index(a, b).expect("triangle side is an edge");
                counts[idx] += 1;
            }
        }
        counts
    }

    /// Index of edge `(u, v)` in [`edges`](Self::edges).
    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let key = ordered(u, v);
        self.edges.binary_search(&key).ok()
    }

    /// Locates the triangle containing `p`, with barycentric weights.
    pub fn locate(&self, p: Point) -> Option<Location> {
        self.locator.get_or_init(|| Locator::new(self)).locate(self, p)
    }

    pub(crate) fn pattern(&self) -> &CsrPattern {
        self.pattern.get_or_init(|| build_pattern(self))
    }

    pub(crate) fn with_grid_shape(mut self, shape: GridShape) -> Self {
        self.grid = Some(shape);
        self
    }
}

fn build_pattern(graph: &DelaunayGraph) -> CsrPattern {
    let n = graph.num_vertices();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n + 2 * graph.num_edges());
    row_ptr.push(0);
    for v in 0..n {
        let nb = graph.neighbors(v);
        let split = nb.partition_point(|&w| w < v);
        col_idx.extend_from_slice(&nb[..split]);
        col_idx.push(v);
        col_idx.extend_from_slice(&nb[split..]);
        row_ptr.push(col_idx.len());
    }
    let slot = |i: usize, j: usize| -> usize {
        let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
        row_ptr[i] + row.binary_search(&j).expect("entry in adjacency pattern")
    };
    let slots = graph
        .triangles()
        .iter()
        .map(|t| {
            let mut s = [[0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    s[a][b] = slot(t.vertices[a], t.vertices[b]);
                }
            }
            s
        })
        .collect();
    CsrPattern {
        row_ptr,
        col_idx,
        slots,
    }
}

fn ordered(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

pub(crate) fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn signed_double_area(points: &[Point], t: [usize; 3]) -> f64 {
    let [a, b, c] = t.map(|v| points[v]);
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

/// Maps points into the unit square by one translation and one uniform
/// scaling; the larger extent is mapped onto `[0, 1]`.
pub fn normalize_points(points: &[Point]) -> Result<Vec<Point>> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "at least 3 points required, got {}",
            points.len()
        )));
    }
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in points {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::DegenerateInput("non-finite coordinate".into()));
        }
        for k in 0..2 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    let extent = (max[0] - min[0]).max(max[1] - min[1]);
    if extent <= 0.0 {
        return Err(Error::DegenerateInput("all points coincide".into()));
    }
    Ok(points
        .iter()
        .map(|p| [(p[0] - min[0]) / extent, (p[1] - min[1]) / extent])
        .collect())
}

/// Graph of an `rows x cols` pixel lattice scaled into the unit square.
///
/// Vertex `r * cols + c` sits at `(c h, r h)` with `h = 1 / (max(rows, cols) - 1)`.
/// Every cell is split along its lower-left to upper-right diagonal, so each
/// interior vertex has exactly six neighbors.
pub fn build_grid_graph(rows: usize, cols: usize) -> Result<DelaunayGraph> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidGridSize { rows, cols });
    }
    let h = 1.0 / (rows.max(cols) - 1) as f64;
    let points = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| [c as f64 * h, r as f64 * h]))
        .collect();
    let graph = DelaunayGraph::from_triangles(points, &lattice_triangles(rows, cols))?;
    Ok(graph.with_grid_shape(GridShape { rows, cols }))
}

/// Lattice of `rows x cols` points spanning `[0, width] x [0, height]`,
/// triangulated like [`build_grid_graph`].
pub fn lattice_graph(rows: usize, cols: usize, width: f64, height: f64) -> Result<DelaunayGraph> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidGridSize { rows, cols });
    }
    if !(width > 0.0 && width <= 1.0 && height > 0.0 && height <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lattice extent {width}x{height} must lie in (0, 1]"
        )));
    }
    let points = (0..rows)
        .flat_map(|r| {
            (0..cols).map(move |c| {
                [
                    width * c as f64 / (cols - 1) as f64,
                    height * r as f64 / (rows - 1) as f64,
                ]
            })
        })
        .collect();
    let graph = DelaunayGraph::from_triangles(points, &lattice_triangles(rows, cols))?;
    Ok(graph.with_grid_shape(GridShape { rows, cols }))
}

fn lattice_triangles(rows: usize, cols: usize) -> Vec<[usize; 3]> {
    let mut tris = Vec::with_capacity(2 * (rows - 1) * (cols - 1));
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let a = r * cols + c;
            let b = a + 1;
            let d = a + cols + 1;
            let e = a + cols;
            tris.push([a, b, d]);
            tris.push([a, d, e]);
        }
    }
    tris
}

/// Vertices of `set` having at least one neighbor outside `set`.
pub fn set_boundary(graph: &DelaunayGraph, set: &VertexSet) -> VertexSet {
    let mut out = VertexSet::empty(graph.num_vertices());
    for v in set.iter() {
        if graph.neighbors(v).iter().any(|&w| !set.contains(w)) {
            out.insert(v);
        }
    }
    out
}

/// Vertices reachable from `seeds` in at most `hops` edges.
pub fn hop_neighborhood(graph: &DelaunayGraph, seeds: &VertexSet, hops: usize) -> VertexSet {
    let mut reached = seeds.clone();
    let mut frontier: Vec<usize> = seeds.iter().collect();
    for _ in 0..hops {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in graph.neighbors(v) {
                if reached.insert(w) {
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    reached
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        let unit = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert_eq!(normalize_points(&unit).unwrap(), unit);

        let pts = vec![[2.0, 2.0], [4.0, 6.0], [3.0, 4.0]];
        assert_eq!(normalize_points(&pts).unwrap(), vec![[0.0, 0.0], [0.5, 1.0], [0.25, 0.5]]);

        let same = vec![[5.0, 5.0]; 3];
        assert!(matches!(normalize_points(&same), Err(Error::DegenerateInput(_))));
        assert!(normalize_points(&[[0.0, 0.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn normalize_preserves_aspect() {
        let pts = vec![[0.0, 0.0], [10.0, 0.0], [10.0, 2.0]];
        let out = normalize_points(&pts).unwrap();
        assert_eq!(out[2], [1.0, 0.2]);
    }

    #[test]
    fn grid_two_by_two() {
        let g = build_grid_graph(2, 2).unwrap();
        assert_eq!(g.num_vertices(), 4);
        assert_eq!(g.num_triangles(), 2);
        assert_eq!(g.num_edges(), 5);
        assert!(g.are_adjacent(0, 3));
        assert!(!g.are_adjacent(1, 2));
    }

    #[test]
    fn grid_seven_by_seven_is_hexagonal() {
        let g = build_grid_graph(7, 7).unwrap();
        assert_eq!(g.num_vertices(), 49);
        assert_eq!(g.num_triangles(), 72);
        for r in 1..6 {
            for c in 1..6 {
                assert_eq!(g.degree(r * 7 + c), 6);
            }
        }
        // Upper-right and lower-left diagonal neighbors only.
        assert!(g.are_adjacent(8, 16));
        assert!(!g.are_adjacent(8, 14));
    }

    #[test]
    fn grid_rejects_degenerate_sizes() {
        assert!(matches!(build_grid_graph(1, 5), Err(Error::InvalidGridSize { .. })));
        assert!(build_grid_graph(5, 1).is_err());
    }

    #[test]
    fn grid_areas_and_edge_multiplicity() {
        let g = build_grid_graph(5, 9).unwrap();
        let h = 1.0 / 8.0;
        assert!((g.total_area() - 8.0 * h * 4.0 * h).abs() < 1e-12);
        let counts = g.edge_triangle_counts();
        assert!(counts.iter().all(|&c| c == 1 || c == 2));
        assert!(g.num_edges() <= 3 * g.num_vertices() - 6);
        for t in g.triangles() {
            let s: [f64; 2] = [0, 1].map(|k| t.gradients.iter().map(|gr| gr[k]).sum());
            assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_of_whole_and_empty_set() {
        let g = build_grid_graph(3, 3).unwrap();
        assert!(set_boundary(&g, &VertexSet::full(9)).is_empty());
        assert!(set_boundary(&g, &VertexSet::empty(9)).is_empty());
    }

    #[test]
    fn boundary_around_removed_center() {
        let g = build_grid_graph(3, 3).unwrap();
        let mut s = VertexSet::full(9);
        s.remove(4);
        let b: Vec<usize> = set_boundary(&g, &s).iter().collect();
        // Center 4 is adjacent to 1, 3, 5, 7 and the diagonal pair 0, 8.
        let mut expected: Vec<usize> = g.neighbors(4).to_vec();
        expected.sort_unstable();
        assert_eq!(b, expected);
        assert_eq!(b, vec![0, 1, 3, 5, 7, 8]);
    }

    #[test]
    fn from_triangles_rejects_bad_input() {
        let pts = vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]];
        assert!(matches!(
            DelaunayGraph::from_triangles(pts, &[[0, 1, 2]]),
            Err(Error::DegenerateTriangle { index: 0 })
        ));
        let pts = vec![[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]];
        assert!(DelaunayGraph::from_triangles(pts, &[[0, 1, 2]]).is_err());
    }

    #[test]
    fn clockwise_triangles_are_reoriented() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let g = DelaunayGraph::from_triangles(pts, &[[0, 2, 1]]).unwrap();
        assert!((g.triangle(0).area - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hop_neighborhood_on_grid() {
        let g = build_grid_graph(5, 5).unwrap();
        let seed = VertexSet::from_indices(25, [12]);
        assert_eq!(hop_neighborhood(&g, &seed, 0).len(), 1);
        assert_eq!(hop_neighborhood(&g, &seed, 1).len(), 7);
    }
}
