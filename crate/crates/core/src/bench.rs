//! Measurement harnesses: per-step cost of full versus narrow-band
//! evolution, and segmentation quality under subsampling.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolution::{explicit_euler_step, CoefficientField, LevelSetState, TimeSchedule};
use crate::fem::MassMode;
use crate::gar::{gar_run, GarParams};
use crate::graph::{signed_distance_init, Polygon};
use crate::io::{subsample_to_graph, Image, SampleMode, Trimap};
use crate::metrics::{MetricsReport, SegmentationMask};
use crate::models::ContourModel;
use crate::narrowband::{BandMode, NarrowBandEvolver};
use crate::solver::SolverKind;
use crate::synthetic::disk_image;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    /// Grid side.
    pub n: usize,
    pub vertices: usize,
    /// Mean seconds per full-domain step.
    pub full_step: f64,
    /// Mean seconds per narrow-band step.
    pub narrow_step: f64,
    pub mean_active: f64,
}

/// Times `steps` steps of geodesic evolution around a disk on `n x n`
/// grids, over the whole domain and on the narrow band. Both paths use the
/// consistent mass matrix and banded Cholesky after reordering.
pub fn scaling_bench(sizes: &[usize], steps: usize) -> Result<Vec<ScalingRow>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("scaling bench needs at least one step".into()));
    }
    sizes
        .iter()
        .map(|&n| {
            let (_, graph, features) = {
                let image = disk_image(n, 0.25)?;
                let (g, f) = image.to_grid()?;
                (image, g, f)
            };
            let nv = graph.num_vertices();
            let circle = Polygon::circle([0.5, 0.5], 0.4, 256)?;
            let c0 = signed_distance_init(&graph, &[circle])?;
            let mut model = ContourModel::geodesic(&features, 1.0, 1.0);
            let h = graph.mean_edge_length();
            let mut schedule = TimeSchedule::new(0.2 * h * h);
            schedule.mass = MassMode::Consistent;
            schedule.solver.kind = SolverKind::Banded;

            let mut state = LevelSetState::new(c0.clone());
            model.prepare(&graph, &c0, state.r)?;
            let start = Instant::now();
            for _ in 0..steps {
                state = explicit_euler_step(&graph, &model, &state, &schedule)?;
                model.refresh(&state.c)?;
            }
            let full_step = start.elapsed().as_secs_f64() / steps as f64;

            let mut model = ContourModel::geodesic(&features, 1.0, 1.0);
            model.prepare(&graph, &c0, LevelSetState::new(c0.clone()).r)?;
            let mut nb_schedule = TimeSchedule::narrowband_default(nv);
            nb_schedule.mass = MassMode::Consistent;
            nb_schedule.solver.kind = SolverKind::Banded;
            let mut evolver = NarrowBandEvolver::new(&graph, &c0, BandMode::General)?;
            let mut active = 0usize;
            let start = Instant::now();
            for _ in 0..steps {
                active += evolver.active_len();
                evolver.step(&mut model, &nb_schedule)?;
            }
            let narrow_step = start.elapsed().as_secs_f64() / steps as f64;
            Ok(ScalingRow {
                n,
                vertices: nv,
                full_step,
                narrow_step,
                mean_active: active as f64 / steps as f64,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn format_scaling(rows: &[ScalingRow]) -> String {
    let mut out = String::from("n vertices full_ms narrow_ms ratio mean_active\n");
    for r in rows {
        writeln!(
            out,
            "{} {} {:.4} {:.4} {:.2} {:.1}",
            r.n,
            r.vertices,
            1e3 * r.full_step,
            1e3 * r.narrow_step,
            r.full_step / r.narrow_step,
            r.mean_active
        )
        .unwrap();
    }
    if rows.len() >= 2 {
        let nv: Vec<f64> = rows.iter().map(|r| r.vertices as f64).collect();
        let full: Vec<f64> = rows.iter().map(|r| r.full_step).collect();
        let narrow: Vec<f64> = rows.iter().map(|r| r.narrow_step).collect();
        writeln!(out, "slope_full {:.3}", loglog_slope(&nv, &full)).unwrap();
        writeln!(out, "slope_narrow {:.3}", loglog_slope(&nv, &narrow)).unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsampleRow {
    pub factor: usize,
    pub vertices: usize,
    pub report: MetricsReport,
}

/// Segments `image` on random subsets of `pixels / factor` points, maps
/// the result back to the pixels and scores it on the trimap's unknown
/// region. Factor 1 uses the full pixel grid.
pub fn subsample_bench(
    image: &Image,
    trimap: &Trimap,
    truth: &SegmentationMask,
    factors: &[usize],
    seed: u64,
    params: &GarParams,
) -> Result<Vec<SubsampleRow>> {
    if (trimap.width(), trimap.height()) != (image.width(), image.height()) || truth.len() != image.num_pixels() {
        return Err(Error::DimensionMismatch {
            expected: image.num_pixels(),
            found: truth.len().min(trimap.codes().len()),
        });
    }
    let unknown = trimap.unknown();
    factors
        .iter()
        .map(|&factor| {
            if factor == 0 {
                return Err(Error::InvalidParameter("subsampling factor must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mode, n) = if factor == 1 {
                (SampleMode::Grid, image.num_pixels())
            } else {
                (SampleMode::Uniform, image.num_pixels() / factor)
            };
            let sampled = subsample_to_graph(image, n, mode, &mut rng)?;
            let seeds = sampled.vertex_trimap(trimap)?.to_seeds(&sampled.graph, None)?;
            let out = gar_run(&sampled.graph, &sampled.features, &seeds, params)?;
            let pixels = sampled.rasterize(&out.mask, image.width(), image.height())?;
            let report = MetricsReport::compute(&pixels, truth, Some(&unknown))?;
            Ok(SubsampleRow {
                factor,
                vertices: sampled.graph.num_vertices(),
                report,
            })
        })
        .collect()
}

pub fn format_subsample(rows: &[SubsampleRow]) -> String {
    let mut out = String::new();
    for r in rows {
        writeln!(out, "factor {} vertices {} {}", r.factor, r.vertices, r.report).unwrap();
    }
    out
}
