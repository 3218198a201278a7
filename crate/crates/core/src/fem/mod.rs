//! Galerkin assembly of `A(c) dc/dt = b(c)` with P1 elements.
//!
//! Nonlinear coefficients are frozen per triangle, so every integrand is a
//! polynomial on each triangle. Mass products are integrated exactly
//! (consistent) or by the vertex rule (lumped); stiffness is always exact.

mod sparse;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{DelaunayGraph, Point, Triangle};

pub use sparse::SparseSymMatrix;

/// Relative area threshold below which a triangle is degenerate.
const DEGENERATE_RATIO: f64 = 1e-14;

/// Gradients of the three nodal basis functions on a triangle.
pub fn element_gradients(corners: &[Point; 3]) -> Result<[[f64; 2]; 3]> {
    let [p1, p2, p3] = *corners;
    let det = (p2[0] - p1[0]) * (p3[1] - p1[1]) - (p3[0] - p1[0]) * (p2[1] - p1[1]);
    let scale = [(p1, p2), (p2, p3), (p3, p1)]
        .iter()
        .map(|&(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
        .fold(0.0, f64::max);
    if !det.is_finite() || det.abs() <= DEGENERATE_RATIO * scale {
        return Err(Error::DegenerateTriangle { index: 0 });
    }
    Ok([
        [(p2[1] - p3[1]) / det, (p3[0] - p2[0]) / det],
        [(p3[1] - p1[1]) / det, (p1[0] - p3[0]) / det],
        [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
    ])
}

/// Vertex rule `E/3 (f1 + f2 + f3)`.
///
/// Exact for polynomials of degree at most one; for `x^2` on the reference
/// triangle it returns 1/6 against the exact 1/12.
pub fn vertex_quadrature(triangle: &Triangle, values: [f64; 3]) -> f64 {
    triangle.area / 3.0 * (values[0] + values[1] + values[2])
}

/// Treatment of the `phi_i phi_j` products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassMode {
    /// Exact products: `E/6` on the diagonal, `E/12` off it.
    Consistent,
    /// Vertex rule: `E/3` on the diagonal only.
    #[default]
    Lumped,
}

impl std::str::FromStr for MassMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistent" => Ok(MassMode::Consistent),
            "lumped" => Ok(MassMode::Lumped),
            other => Err(Error::InvalidParameter(format!("unknown mass mode '{other}'"))),
        }
    }
}

/// Mass block of one triangle with coefficient `f`.
pub fn local_mass_block(triangle: &Triangle, f: f64, mode: MassMode) -> [[f64; 3]; 3] {
    let scaled = f * triangle.area;
    match mode {
        MassMode::Consistent => {
            let (d, o) = (scaled / 6.0, scaled / 12.0);
            [[d, o, o], [o, d, o], [o, o, d]]
        }
        MassMode::Lumped => {
            let d = scaled / 3.0;
            [[d, 0.0, 0.0], [0.0, d, 0.0], [0.0, 0.0, d]]
        }
    }
}

/// Stiffness block `g E grad(phi_a) . grad(phi_b)`.
pub fn local_stiffness_block(triangle: &Triangle, g: f64) -> [[f64; 3]; 3] {
    let w = g * triangle.area;
    let gr = &triangle.gradients;
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = w * (gr[a][0] * gr[b][0] + gr[a][1] * gr[b][1]);
        }
    }
    k
}

/// Frozen model coefficients on one triangle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TriangleCoefficients {
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

/// Assembles `sum_T blocks[T]` into the adjacency pattern.
///
/// Rows are filled independently, each visiting its incident triangles in
/// increasing index order, so the result is bit-identical for any thread
/// count and exactly symmetric.
fn assemble_blocks(graph: &DelaunayGraph, blocks: &[[[f64; 3]; 3]]) -> SparseSymMatrix {
    let pattern = graph.pattern();
    let mut values = vec![0.0; pattern.col_idx.len()];
    let mut rows: Vec<&mut [f64]> = Vec::with_capacity(graph.num_vertices());
    let mut rest = values.as_mut_slice();
    for v in 0..graph.num_vertices() {
        let len = pattern.row_ptr[v + 1] - pattern.row_ptr[v];
        let (row, tail) = rest.split_at_mut(len);
        rows.push(row);
        rest = tail;
    }
    rows.par_iter_mut().enumerate().for_each(|(v, row)| {
        let start = pattern.row_ptr[v];
        for &t in graph.incident_triangles(v) {
            let a = graph.triangle(t).corner_of(v).expect("incident triangle has v as corner");
            for b in 0..3 {
                row[pattern.slots[t][a][b] - start] += blocks[t][a][b];
            }
        }
    });
    SparseSymMatrix::from_parts(pattern.row_ptr.clone(), pattern.col_idx.clone(), values)
}

/// Mass matrix `A_ij = sum_T f_T int phi_i phi_j`.
pub fn assemble_mass(graph: &DelaunayGraph, f: &[f64], mode: MassMode) -> Result<SparseSymMatrix> {
    check_len(graph.num_triangles(), f.len())?;
    let blocks: Vec<_> = graph
        .triangles()
        .par_iter()
        .zip(f.par_iter())
        .map(|(t, &ft)| local_mass_block(t, ft, mode))
        .collect();
    Ok(assemble_blocks(graph, &blocks))
}

/// Stiffness matrix `K_ij = sum_T g_T int grad(phi_i) . grad(phi_j)`.
pub fn assemble_stiffness(graph: &DelaunayGraph, g: &[f64]) -> Result<SparseSymMatrix> {
    check_len(graph.num_triangles(), g.len())?;
    let blocks: Vec<_> = graph
        .triangles()
        .par_iter()
        .zip(g.par_iter())
        .map(|(t, &gt)| local_stiffness_block(t, gt))
        .collect();
    Ok(assemble_blocks(graph, &blocks))
}

/// Source vector `h_j = sum_T h_T E(T)/3` over triangles incident to `v_j`.
pub fn assemble_source(graph: &DelaunayGraph, h: &[f64]) -> Result<Vec<f64>> {
    check_len(graph.num_triangles(), h.len())?;
    Ok((0..graph.num_vertices())
        .into_par_iter()
        .map(|v| {
            graph
                .incident_triangles(v)
                .iter()
                .map(|&t| vertex_quadrature(graph.triangle(t), [h[t]; 3]) / 3.0)
                .sum()
        })
        .collect())
}

/// Left-hand matrix `A(c)` from frozen coefficients.
pub fn assemble_a(graph: &DelaunayGraph, coeffs: &[TriangleCoefficients], mode: MassMode) -> Result<SparseSymMatrix> {
    let f: Vec<f64> = coeffs.iter().map(|k| k.f).collect();
    assemble_mass(graph, &f, mode)
}

/// Right-hand side `b(c) = -K c + h` from frozen coefficients.
pub fn assemble_b(graph: &DelaunayGraph, coeffs: &[TriangleCoefficients], c: &[f64]) -> Result<Vec<f64>> {
    check_len(graph.num_vertices(), c.len())?;
    let (k, h) = assemble_k_h(graph, coeffs)?;
    let kc = k.mul_vec(c);
    Ok(h.iter().zip(&kc).map(|(h, kc)| h - kc).collect())
}

/// Stiffness matrix and source vector, the two linear pieces of `b`.
pub fn assemble_k_h(graph: &DelaunayGraph, coeffs: &[TriangleCoefficients]) -> Result<(SparseSymMatrix, Vec<f64>)> {
    let g: Vec<f64> = coeffs.iter().map(|k| k.g).collect();
    let h: Vec<f64> = coeffs.iter().map(|k| k.h).collect();
    Ok((assemble_stiffness(graph, &g)?, assemble_source(graph, &h)?))
}

/// Contribution of one triangle to `b_v`, for a corner `v`.
pub(crate) fn local_rhs(triangle: &Triangle, corner: usize, coeffs: TriangleCoefficients, c: &[f64]) -> f64 {
    let grad_u = triangle.gradient_of(c);
    let gp = triangle.gradients[corner];
    let stiff = coeffs.g * triangle.area * (grad_u[0] * gp[0] + grad_u[1] * gp[1]);
    coeffs.h * triangle.area / 3.0 - stiff
}

/// Linear interpolant of nodal values `c` at `p`.
pub fn interpolate(graph: &DelaunayGraph, c: &[f64], p: Point) -> Result<f64> {
    check_len(graph.num_vertices(), c.len())?;
    let loc = graph.locate(p).ok_or(Error::OutOfDomain { x: p[0], y: p[1] })?;
    let tri = graph.triangle(loc.triangle);
    Ok((0..3).map(|k| loc.bary[k] * c[tri.vertices[k]]).sum())
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_grid_graph;

    fn reference() -> Triangle {
        let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        Triangle {
            vertices: [0, 1, 2],
            area: 0.5,
            gradients: element_gradients(&corners).unwrap(),
        }
    }

    #[test]
    fn reference_gradients() {
        let g = reference().gradients;
        assert_eq!(g, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn scaled_triangle_halves_gradients() {
        let a = element_gradients(&[[0.1, 0.2], [0.4, 0.25], [0.2, 0.5]]).unwrap();
        let b = element_gradients(&[[0.2, 0.4], [0.8, 0.5], [0.4, 1.0]]).unwrap();
        for k in 0..3 {
            for d in 0..2 {
                assert!((b[k][d] - 0.5 * a[k][d]).abs() < 1e-12);
            }
        }
        let s = [0, 1].map(|d| a.iter().map(|g| g[d]).sum::<f64>());
        assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
    }

    #[test]
    fn degenerate_gradients_fail() {
        assert!(element_gradients(&[[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn quadrature_examples() {
        let t = reference();
        assert_eq!(vertex_quadrature(&t, [1.0; 3]), 0.5);
        assert!((vertex_quadrature(&t, [0.0, 1.0, 0.0]) - 1.0 / 6.0).abs() < 1e-15);
        // f = x^2: rule gives 1/6, the exact integral is 1/12.
        assert!((vertex_quadrature(&t, [0.0, 1.0, 0.0]) - 1.0 / 12.0).abs() > 0.08);
    }

    #[test]
    fn mass_blocks() {
        let t = reference();
        let c = local_mass_block(&t, 1.0, MassMode::Consistent);
        assert!((c[0][0] - 1.0 / 12.0).abs() < 1e-15);
        assert!((c[0][1] - 1.0 / 24.0).abs() < 1e-15);
        let l = local_mass_block(&t, 1.0, MassMode::Lumped);
        assert!((l[1][1] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(l[0][2], 0.0);
        for a in 0..3 {
            let rc: f64 = c[a].iter().sum();
            let rl: f64 = l[a].iter().sum();
            assert!((rc - rl).abs() < 1e-15);
        }
    }

    #[test]
    fn two_by_two_mass_sums_to_area() {
        let g = build_grid_graph(2, 2).unwrap();
        for mode in [MassMode::Consistent, MassMode::Lumped] {
            let a = assemble_mass(&g, &[1.0; 2], mode).unwrap();
            assert!((a.sum_all() - 1.0).abs() < 1e-15);
        }
        let zero = assemble_mass(&g, &[0.0; 2], MassMode::Consistent).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_field_has_zero_interior_stiffness() {
        let g = build_grid_graph(5, 5).unwrap();
        let c: Vec<f64> = g.points().iter().map(|p| p[0]).collect();
        let coeffs = vec![TriangleCoefficients { f: 1.0, g: 1.0, h: 0.0 }; g.num_triangles()];
        let b = assemble_b(&g, &coeffs, &c).unwrap();
        for r in 1..4 {
            for col in 1..4 {
                assert!(b[r * 5 + col].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_source_matches_incident_area() {
        let g = build_grid_graph(4, 6).unwrap();
        let coeffs = vec![TriangleCoefficients { f: 1.0, g: 0.0, h: 1.0 }; g.num_triangles()];
        let b = assemble_b(&g, &coeffs, &vec![0.3; g.num_vertices()]).unwrap();
        for v in 0..g.num_vertices() {
            assert!((b[v] - g.incident_area(v) / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn local_rhs_sums_to_assembled_b() {
        let g = build_grid_graph(4, 4).unwrap();
        let c: Vec<f64> = g.points().iter().map(|p| (p[0] - 0.4).hypot(p[1] - 0.6) - 0.3).collect();
        let coeffs: Vec<_> = (0..g.num_triangles())
            .map(|t| TriangleCoefficients { f: 1.0, g: 0.5 + t as f64 * 0.01, h: -0.2 })
            .collect();
        let b = assemble_b(&g, &coeffs, &c).unwrap();
        for v in 0..g.num_vertices() {
            let local: f64 = g
                .incident_triangles(v)
                .iter()
                .map(|&t| local_rhs(g.triangle(t), g.triangle(t).corner_of(v).unwrap(), coeffs[t], &c))
                .sum();
            assert!((local - b[v]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation() {
        let g = build_grid_graph(5, 5).unwrap();
        let c: Vec<f64> = (0..25).map(|i| (i * i) as f64 * 0.1).collect();
        for v in 0..25 {
            assert!((interpolate(&g, &c, g.point(v)).unwrap() - c[v]).abs() < 1e-12);
        }
        let t = g.triangle(7);
        let centroid = [0, 1].map(|d| t.vertices.iter().map(|&v| g.point(v)[d]).sum::<f64>() / 3.0);
        let mean = t.vertices.iter().map(|&v| c[v]).sum::<f64>() / 3.0;
        assert!((interpolate(&g, &c, centroid).unwrap() - mean).abs() < 1e-12);
        assert!(matches!(interpolate(&g, &c, [1.5, 0.5]), Err(Error::OutOfDomain { .. })));
    }
}
