//! Contour polylines from the sign pattern of a level-set function.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{DelaunayGraph, Point};
use crate::metrics::SegmentationMask;

/// Midpoints of edges whose endpoints carry different labels, chained
/// through shared triangles. Closed loops repeat their first point.
pub fn contour_polylines(graph: &DelaunayGraph, mask: &SegmentationMask) -> Result<Vec<Vec<Point>>> {
    if mask.len() != graph.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_vertices(),
            found: mask.len(),
        });
    }
    let edges = graph.edges();
    let crosses = |e: usize| {
        let (u, v) = edges[e];
        mask.is_foreground(u) != mask.is_foreground(v)
    };
    let mut links: Vec<Vec<usize>> = vec![Vec::new(); edges.len()];
    for t in graph.triangles() {
        let [a, b, c] = t.vertices;
        let sides: Vec<usize> = [(a, b), (b, c), (c, a)]
            .iter()
            .filter_map(|&(u, v)| graph.edge_index(u, v))
            .filter(|&e| crosses(e))
            .collect();
        if let [e, f] = sides[..] {
            links[e].push(f);
            links[f].push(e);
        }
    }
    let midpoint = |e: usize| {
        let (u, v) = edges[e];
        let (p, q) = (graph.point(u), graph.point(v));
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    };
    let mut seen = vec![false; edges.len()];
    let mut out = Vec::new();
    let walk = |start: usize, seen: &mut Vec<bool>| {
        let mut line = vec![midpoint(start)];
        seen[start] = true;
        let mut cur = start;
        loop {
            match links[cur].iter().copied().find(|&f| !seen[f]) {
                Some(next) => {
                    seen[next] = true;
                    line.push(midpoint(next));
                    cur = next;
                }
                None => {
                    if line.len() > 2 && links[cur].contains(&start) {
                        line.push(line[0]);
                    }
                    return line;
                }
            }
        }
    };
    // Open chains start at an end; what remains are loops.
    for e in 0..edges.len() {
        if crosses(e) && !seen[e] && links[e].len() < 2 {
            out.push(walk(e, &mut seen));
        }
    }
    for e in 0..edges.len() {
        if crosses(e) && !seen[e] {
            out.push(walk(e, &mut seen));
        }
    }
    Ok(out)
}

/// `x,y` lines, polylines separated by a blank line.
pub fn format_contour(polylines: &[Vec<Point>]) -> String {
    let mut out = String::new();
    for (k, line) in polylines.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for p in line {
            writeln!(out, "{},{}", p[0], p[1]).unwrap();
        }
    }
    out
}

pub fn write_contour(path: &Path, graph: &DelaunayGraph, mask: &SegmentationMask) -> Result<()> {
    let text = format_contour(&contour_polylines(graph, mask)?);
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
