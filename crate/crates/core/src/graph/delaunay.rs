//! Delaunay triangulation of scattered points.

use spade::{DelaunayTriangulation, Point2, Triangulation};

use super::{DelaunayGraph, Point};
use crate::error::{Error, Result};
use crate::fem::element_gradients;

/// Relative tolerance below which three points are treated as collinear.
const COLLINEAR_TOLERANCE: f64 = 1e-12;

/// Delaunay triangulation of normalized points.
///
/// Duplicate and all-collinear inputs are rejected rather than repaired.
/// The triangulation is computed with exact orientation and in-circle
/// predicates, so it is reproducible for a given point order.
pub fn delaunay_triangulate(points: &[Point]) -> Result<DelaunayGraph> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "at least 3 points required, got {}",
            points.len()
        )));
    }
    check_duplicates(points)?;
    check_collinear(points)?;

    let vertices: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let dt = DelaunayTriangulation::<Point2<f64>>::bulk_load_stable(vertices)
        .map_err(|e| Error::DegenerateInput(format!("triangulation failed: {e:?}")))?;
    if dt.num_vertices() != points.len() {
        return Err(Error::DegenerateInput("duplicate points merged during triangulation".into()));
    }
    // Nearly collinear hull vertices yield zero-area slivers; they carry no
    // area and are dropped.
    let triangles: Vec<[usize; 3]> = dt
        .inner_faces()
        .map(|f| f.vertices().map(|v| v.fix().index()))
        .filter(|t| element_gradients(&t.map(|v| points[v])).is_ok())
        .collect();
    let mut covered = vec![false; points.len()];
    for t in &triangles {
        for &v in t {
            covered[v] = true;
        }
    }
    if let Some(v) = covered.iter().position(|&c| !c) {
        return Err(Error::DegenerateInput(format!(
            "vertex {v} belongs only to zero-area triangles"
        )));
    }
    DelaunayGraph::from_triangles(points.to_vec(), &triangles)
}

fn check_duplicates(points: &[Point]) -> Result<()> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            let (first, second) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(Error::DuplicatePoint { first, second });
        }
    }
    Ok(())
}

fn check_collinear(points: &[Point]) -> Result<()> {
    let a = points[0];
    // Farthest point from the first one fixes the reference direction.
    let (far, _) = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p[0] - a[0]).hypot(p[1] - a[1])))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let b = points[far];
    let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
    let any_off_line = points.iter().any(|p| {
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        cross.abs() > COLLINEAR_TOLERANCE * len2
    });
    if any_off_line {
        Ok(())
    } else {
        Err(Error::Collinear)
    }
}
