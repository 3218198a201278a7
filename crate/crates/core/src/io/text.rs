//! Line-oriented text formats: graphs with vertex features, level-set
//! snapshots and polygon lists.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evolution::Snapshot;
use crate::graph::{delaunay_triangulate, normalize_points, DelaunayGraph, Point, Polygon};
use crate::models::FeatureField;

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their byte offsets.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').filter_map(move |raw| {
        let at = offset;
        offset += raw.len();
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((at, line))
    })
}

fn parse_field<T: std::str::FromStr>(path: &Path, at: usize, token: Option<&str>, what: &str) -> Result<T> {
    let token = token.ok_or_else(|| Error::format(path, at, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| Error::format(path, at, format!("invalid {what} '{token}'")))
}

/// Graph read from text together with its per-vertex features.
#[derive(Debug, Clone)]
pub struct GraphFile {
    pub graph: DelaunayGraph,
    /// `None` when the vertex lines carry no features.
    pub features: Option<FeatureField>,
}

/// Parses `graph N M`, `N` lines `v x y [feature...]`, then `M` lines `t i j k`.
///
/// Coordinates outside the unit square are rescaled uniformly into it; with
/// `M = 0` the Delaunay triangulation of the points is used.
pub fn parse_graph(text: &str, path: &Path) -> Result<GraphFile> {
    let mut it = lines(text);
    let (at, header) = it.next().ok_or_else(|| Error::format(path, 0, "empty graph file"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("graph") {
        return Err(Error::format(path, at, "expected header 'graph <N> <M>'"));
    }
    let n: usize = parse_field(path, at, tok.next(), "vertex count")?;
    let m: usize = parse_field(path, at, tok.next(), "triangle count")?;

    let mut points = Vec::with_capacity(n);
    let mut features = Vec::new();
    let mut width = None;
    for k in 0..n {
        let (at, line) = it
            .next()
            .ok_or_else(|| Error::format(path, text.len(), format!("expected {n} vertex lines, found {k}")))?;
        let mut tok = line.split_whitespace();
        if tok.next() != Some("v") {
            return Err(Error::format(path, at, "expected a vertex line 'v <x> <y> [feature...]'"));
        }
        let x: f64 = parse_field(path, at, tok.next(), "x coordinate")?;
        let y: f64 = parse_field(path, at, tok.next(), "y coordinate")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::format(path, at, "coordinates must be finite"));
        }
        points.push([x, y]);
        let row: Vec<f64> = tok
            .map(|t| parse_field(path, at, Some(t), "feature"))
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::format(path, at, format!("vertex has {} features, expected {w}", row.len())))
            }
            _ => {}
        }
        features.extend(row);
    }
    let mut triangles = Vec::with_capacity(m);
    for k in 0..m {
        let (at, line) = it
            .next()
            .ok_or_else(|| Error::format(path, text.len(), format!("expected {m} triangle lines, found {k}")))?;
        let mut tok = line.split_whitespace();
        if tok.next() != Some("t") {
            return Err(Error::format(path, at, "expected a triangle line 't <i> <j> <k>'"));
        }
        let mut tri = [0usize; 3];
        for corner in &mut tri {
            *corner = parse_field(path, at, tok.next(), "vertex index")?;
            if *corner >= n {
                return Err(Error::format(path, at, format!("vertex index {} out of range", *corner)));
            }
        }
        triangles.push(tri);
    }
    if let Some((at, _)) = it.next() {
        return Err(Error::format(path, at, "unexpected content after the declared vertices and triangles"));
    }

    let in_unit = points.iter().flatten().all(|&c| (0.0..=1.0).contains(&c));
    if !in_unit {
        points = normalize_points(&points)?;
    }
    let graph = if triangles.is_empty() {
        delaunay_triangulate(&points)?
    } else {
        DelaunayGraph::from_triangles(points, &triangles)?
    };
    let features = match width {
        Some(w) if w > 0 => Some(FeatureField::new(&graph, w, features)?),
        _ => None,
    };
    Ok(GraphFile { graph, features })
}

pub fn read_graph(path: &Path) -> Result<GraphFile> {
    parse_graph(&read_text(path)?, path)
}

pub fn format_graph(graph: &DelaunayGraph, features: Option<&FeatureField>) -> String {
    let mut out = format!("graph {} {}\n", graph.num_vertices(), graph.num_triangles());
    for (v, p) in graph.points().iter().enumerate() {
        write!(out, "v {} {}", p[0], p[1]).unwrap();
        if let Some(f) = features {
            for x in f.at(v) {
                write!(out, " {x}").unwrap();
            }
        }
        out.push('\n');
    }
    for t in graph.triangles() {
        let [i, j, k] = t.vertices;
        writeln!(out, "t {i} {j} {k}").unwrap();
    }
    out
}

pub fn write_graph(path: &Path, graph: &DelaunayGraph, features: Option<&FeatureField>) -> Result<()> {
    write_text(path, &format_graph(graph, features))
}

/// `snapshot <k> <t>` followed by one coefficient per line.
pub fn format_snapshot(s: &Snapshot) -> String {
    let mut out = format!("snapshot {} {}\n", s.step, s.t);
    for c in &s.c {
        writeln!(out, "{c}").unwrap();
    }
    out
}

pub fn parse_snapshot(text: &str, path: &Path) -> Result<Snapshot> {
    let mut it = lines(text);
    let (at, header) = it.next().ok_or_else(|| Error::format(path, 0, "empty snapshot file"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("snapshot") {
        return Err(Error::format(path, at, "expected header 'snapshot <k> <t>'"));
    }
    let step = parse_field(path, at, tok.next(), "step")?;
    let t = parse_field(path, at, tok.next(), "time")?;
    let c = it
        .map(|(at, line)| {
            let v: f64 = parse_field(path, at, Some(line), "coefficient")?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::format(path, at, "coefficients must be finite"))
            }
        })
        .collect::<Result<_>>()?;
    Ok(Snapshot { step, t, c })
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    parse_snapshot(&read_text(path)?, path)
}

pub fn write_snapshot(path: &Path, s: &Snapshot) -> Result<()> {
    write_text(path, &format_snapshot(s))
}

/// Writes `snapshot_<k>.txt` files into `dir`.
pub fn write_snapshots(dir: &Path, snapshots: &[Snapshot]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in snapshots {
        write_snapshot(&dir.join(format!("snapshot_{:06}.txt", s.step)), s)?;
    }
    Ok(())
}

/// Polygons as `x y` (or `x,y`) vertex lines, one polygon per blank-line
/// separated block; an open ring is closed automatically.
pub fn parse_polygons(text: &str, path: &Path) -> Result<Vec<Polygon>> {
    let mut polygons = Vec::new();
    let mut ring: Vec<Point> = Vec::new();
    let mut offset = 0;
    let mut start = 0;
    let mut finish = |ring: &mut Vec<Point>, at: usize| -> Result<()> {
        if !ring.is_empty() {
            let poly = Polygon::closed(std::mem::take(ring)).map_err(|e| Error::format(path, at, e.to_string()))?;
            polygons.push(poly);
        }
        Ok(())
    };
    for raw in text.split_inclusive('\n') {
        let at = offset;
        offset += raw.len();
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if raw.split('#').count() == 1 {
                finish(&mut ring, start)?;
            }
            continue;
        }
        if ring.is_empty() {
            start = at;
        }
        let mut tok = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty());
        let x = parse_field(path, at, tok.next(), "x coordinate")?;
        let y = parse_field(path, at, tok.next(), "y coordinate")?;
        if tok.next().is_some() {
            return Err(Error::format(path, at, "expected two coordinates per line"));
        }
        ring.push([x, y]);
    }
    finish(&mut ring, start)?;
    if polygons.is_empty() {
        return Err(Error::format(path, 0, "no polygon found"));
    }
    Ok(polygons)
}

pub fn read_polygons(path: &Path) -> Result<Vec<Polygon>> {
    parse_polygons(&read_text(path)?, path)
}

pub fn format_polygons(polygons: &[Polygon]) -> String {
    let blocks: Vec<String> = polygons
        .iter()
        .map(|p| p.vertices().iter().map(|v| format!("{} {}\n", v[0], v[1])).collect())
        .collect();
    blocks.join("\n")
}
