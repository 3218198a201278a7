//! Supervised segmentation with colour histograms: the region-driven
//! geodesic model alternating between expanding and shrinking fronts,
//! followed by a histogram/median clean-up near the boundary.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::TimeSchedule;
use crate::graph::{hop_neighborhood, signed_distance_from_mask, DelaunayGraph, Polygon, VertexSet};
use crate::metrics::SegmentationMask;
use crate::models::{ContourModel, Direction, FeatureField};
use crate::narrowband::{constrained_evolve, BandMode};

/// User seeds: foreground `F`, background `B`, everything else undefined.
#[derive(Debug, Clone)]
pub struct SeedLabeling {
    foreground: VertexSet,
    background: VertexSet,
    roi: Option<Polygon>,
}

impl SeedLabeling {
    /// Vertices outside `roi` join the background.
    pub fn new(graph: &DelaunayGraph, foreground: VertexSet, mut background: VertexSet, roi: Option<Polygon>) -> Result<Self> {
        let n = graph.num_vertices();
        for set in [&foreground, &background] {
            if set.universe() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: set.universe(),
                });
            }
        }
        if let Some(v) = foreground.iter().find(|&v| background.contains(v)) {
            return Err(Error::InvalidParameter(format!("vertex {v} is seeded as both foreground and background")));
        }
        if let Some(poly) = &roi {
            for v in 0..n {
                if !poly.contains(graph.point(v)) {
                    if foreground.contains(v) {
                        return Err(Error::InvalidParameter(format!(
                            "foreground seed {v} lies outside the region of interest"
                        )));
                    }
                    background.insert(v);
                }
            }
        }
        Ok(SeedLabeling {
            foreground,
            background,
            roi,
        })
    }

    pub fn foreground(&self) -> &VertexSet {
        &self.foreground
    }

    pub fn background(&self) -> &VertexSet {
        &self.background
    }

    pub fn undefined(&self) -> VertexSet {
        self.foreground.union(&self.background).complement()
    }

    pub fn roi(&self) -> Option<&Polygon> {
        self.roi.as_ref()
    }

    /// Forces seeds to their labels.
    pub fn pin(&self, mask: &mut SegmentationMask) {
        for v in self.foreground.iter() {
            mask.set(v, true);
        }
        for v in self.background.iter() {
            mask.set(v, false);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramParams {
    /// Bins per channel.
    pub bins: usize,
    /// Pseudo-count added to every bin.
    pub smoothing: f64,
}

impl Default for HistogramParams {
    fn default() -> Self {
        HistogramParams {
            bins: 16,
            smoothing: 1.0,
        }
    }
}

/// Foreground and background colour distributions on a `bins^channels` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionHistograms {
    bins: usize,
    channels: usize,
    smoothing: f64,
    foreground: Vec<f64>,
    background: Vec<f64>,
}

impl RegionHistograms {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Normalised foreground probabilities, bin-major with channel 0 slowest.
    pub fn foreground(&self) -> &[f64] {
        &self.foreground
    }

    pub fn background(&self) -> &[f64] {
        &self.background
    }

    pub fn bin_of(&self, value: &[f64]) -> usize {
        bin_index(value, self.bins)
    }
}

fn bin_index(value: &[f64], bins: usize) -> usize {
    value.iter().fold(0, |acc, &x| {
        let b = ((x.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        acc * bins + b
    })
}

fn histogram(features: &FeatureField, samples: &VertexSet, bins: usize, len: usize) -> Vec<f64> {
    let idx: Vec<usize> = samples.iter().collect();
    idx.par_iter()
        .fold(
            || vec![0u64; len],
            |mut acc, &v| {
                acc[bin_index(features.at(v), bins)] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; len],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
        .into_iter()
        .map(|c| c as f64)
        .collect()
}

fn normalise(counts: Vec<f64>, smoothing: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + smoothing * counts.len() as f64;
    counts.into_iter().map(|c| (c + smoothing) / total).collect()
}

/// Counts the colours of both sample sets and turns them into smoothed
/// probability mass functions.
pub fn train_histograms(
    features: &FeatureField,
    samples_f: &VertexSet,
    samples_b: &VertexSet,
    params: &HistogramParams,
) -> Result<RegionHistograms> {
    let channels = features.channels();
    if params.bins == 0 || !(params.smoothing >= 0.0 && params.smoothing.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "histogram needs at least one bin and a finite non-negative smoothing, got {} and {}",
            params.bins, params.smoothing
        )));
    }
    if !(1..=3).contains(&channels) {
        return Err(Error::Training(format!("features must have 1 to 3 channels, got {channels}")));
    }
    if samples_f.is_empty() {
        return Err(Error::Training(
            "no foreground samples; the seeds must mark at least one foreground vertex".into(),
        ));
    }
    if samples_b.is_empty() {
        return Err(Error::Training(
            "no background samples; mark background seeds or restrict the region of interest".into(),
        ));
    }
    let len = params.bins.pow(channels as u32);
    Ok(RegionHistograms {
        bins: params.bins,
        channels,
        smoothing: params.smoothing,
        foreground: normalise(histogram(features, samples_f, params.bins, len), params.smoothing),
        background: normalise(histogram(features, samples_b, params.bins, len), params.smoothing),
    })
}

/// Per-vertex histogram lookups and the derived soft label.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodField {
    pub foreground: Vec<f64>,
    pub background: Vec<f64>,
    /// `ln(H_F / H_B)`.
    pub log_ratio: Vec<f64>,
    /// Logistic of `alpha * log_ratio`, in `(0, 1)` when smoothing is positive.
    pub likelihood: Vec<f64>,
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn likelihood_field(hist: &RegionHistograms, features: &FeatureField, alpha: f64) -> Result<LikelihoodField> {
    if features.channels() != hist.channels {
        return Err(Error::DimensionMismatch {
            expected: hist.channels,
            found: features.channels(),
        });
    }
    let n = features.num_vertices();
    let (mut hf, mut hb, mut lr, mut lk) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for v in 0..n {
        let bin = hist.bin_of(features.at(v));
        hf[v] = hist.foreground[bin];
        hb[v] = hist.background[bin];
        // Both zero only happens without smoothing; treat as undecided.
        lr[v] = if hf[v] == hb[v] { 0.0 } else { (hf[v] / hb[v]).ln() };
        lk[v] = logistic(alpha * lr[v]);
    }
    Ok(LikelihoodField {
        foreground: hf,
        background: hb,
        log_ratio: lr,
        likelihood: lk,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarParams {
    pub histogram: HistogramParams,
    /// Sigmoid gain.
    pub alpha: f64,
    /// Edge-stopping sensitivity, with gradients measured per mean edge
    /// length.
    pub lambda: f64,
    /// Balloon magnitude per mean edge length, so that on image grids it is
    /// measured in pixels rather than in unit-square lengths.
    pub beta: f64,
    /// Stop once successive outer iterations agree on this fraction of vertices.
    pub agreement: f64,
    pub max_outer: usize,
    /// Width of the refinement band in hops; 0 skips refinement.
    pub band_hops: usize,
    /// Schedule of each expand/shrink phase; derived from the graph when `None`.
    pub schedule: Option<TimeSchedule>,
}

impl Default for GarParams {
    fn default() -> Self {
        GarParams {
            histogram: HistogramParams::default(),
            alpha: 5.0,
            lambda: 1.0,
            beta: 1.0,
            agreement: 0.995,
            max_outer: 10,
            band_hops: 2,
            schedule: None,
        }
    }
}

impl GarParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.agreement) {
            return bad(format!("agreement must lie in [0, 1], got {}", self.agreement));
        }
        if self.max_outer == 0 {
            return bad("at least one outer iteration is required".into());
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        Ok(())
    }

    /// Phase schedule: narrow-band default step, unit-speed front window.
    pub fn phase_schedule(&self, graph: &DelaunayGraph) -> TimeSchedule {
        self.schedule.unwrap_or_else(|| {
            let mut s = TimeSchedule::narrowband_default(graph.num_vertices()).with_front_window(graph);
            s.max_steps = 50_000;
            s
        })
    }
}

#[derive(Debug, Clone)]
pub struct GarOutcome {
    pub mask: SegmentationMask,
    /// Outer iterations performed.
    pub iterations: usize,
    pub converged: bool,
    /// Label agreement of each outer iteration with the previous one.
    pub agreements: Vec<f64>,
    /// False when agreement dropped over the last two iterations.
    pub monotone: bool,
    /// Evolution steps of every phase, in order.
    pub phase_steps: Vec<usize>,
    /// Mask before boundary refinement.
    pub unrefined: SegmentationMask,
}

/// Likelihood with seeds forced to certainty, so each front stops on the
/// opposite seeds.
pub fn seed_clamped(likelihood: &[f64], seeds: &SeedLabeling) -> Vec<f64> {
    let mut l = likelihood.to_vec();
    for v in seeds.foreground.iter() {
        l[v] = 1.0;
    }
    for v in seeds.background.iter() {
        l[v] = 0.0;
    }
    l
}

fn run_phase(
    graph: &DelaunayGraph,
    features: &FeatureField,
    seeds: &SeedLabeling,
    hist: &RegionHistograms,
    mask: &SegmentationMask,
    direction: Direction,
    params: &GarParams,
    schedule: &TimeSchedule,
) -> Result<(SegmentationMask, usize)> {
    let field = likelihood_field(hist, features, params.alpha)?;
    let l = seed_clamped(&field.likelihood, seeds);
    let h = graph.mean_edge_length();
    let mut model = ContourModel::gar(features, params.lambda * h * h, params.beta / h, &l, direction)?;
    let c0 = signed_distance_from_mask(graph, &mask.to_vertex_set());
    // The one-sided bands freeze crossed vertices near zero, which flattens
    // the gradient behind the front and stalls it; evolve on the full band
    // and keep the phase one-sided on the labels instead.
    let out = constrained_evolve(graph, &mut model, &c0, schedule, BandMode::General)?;
    let mut next = SegmentationMask::from_level_set(&out.state.c);
    for v in 0..next.len() {
        match direction {
            Direction::Expand if mask.is_foreground(v) => next.set(v, true),
            Direction::Shrink if !mask.is_foreground(v) => next.set(v, false),
            _ => {}
        }
    }
    seeds.pin(&mut next);
    Ok((next, out.steps))
}

fn retrain(features: &FeatureField, mask: &SegmentationMask, params: &HistogramParams) -> Result<RegionHistograms> {
    let f = mask.to_vertex_set();
    train_histograms(features, &f, &f.complement(), params)
}

/// Alternates expanding and shrinking phases, retraining the colour model
/// after each, until two outer iterations agree; then refines the boundary.
pub fn gar_run(graph: &DelaunayGraph, features: &FeatureField, seeds: &SeedLabeling, params: &GarParams) -> Result<GarOutcome> {
    params.validate()?;
    if features.num_vertices() != graph.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_vertices(),
            found: features.num_vertices(),
        });
    }
    let schedule = params.phase_schedule(graph);
    let mut hist = train_histograms(features, &seeds.foreground, &seeds.background, &params.histogram)?;
    let mut mask = SegmentationMask::from_set(&seeds.foreground);
    let mut agreements = Vec::new();
    let mut phase_steps = Vec::new();
    let mut converged = false;
    while agreements.len() < params.max_outer {
        let previous = mask.clone();
        for direction in [Direction::Expand, Direction::Shrink] {
            let (next, steps) = run_phase(graph, features, seeds, &hist, &mask, direction, params, &schedule)?;
            mask = next;
            phase_steps.push(steps);
            hist = retrain(features, &mask, &params.histogram)?;
        }
        let agreement = mask.agreement(&previous);
        agreements.push(agreement);
        if agreement >= params.agreement {
            converged = true;
            break;
        }
    }
    let monotone = match agreements.len() {
        0 | 1 => true,
        k => agreements[k - 1] >= agreements[k - 2],
    };
    let unrefined = mask.clone();
    let mut refined = refine_boundary(graph, features, &mask, params.band_hops, &params.histogram)?;
    seeds.pin(&mut refined);
    Ok(GarOutcome {
        mask: refined,
        iterations: agreements.len(),
        converged,
        agreements,
        monotone,
        phase_steps,
        unrefined,
    })
}

/// Vertices with a neighbour carrying the other label.
pub fn mask_boundary(graph: &DelaunayGraph, mask: &SegmentationMask) -> VertexSet {
    let mut out = VertexSet::empty(graph.num_vertices());
    for v in 0..graph.num_vertices() {
        if graph.neighbors(v).iter().any(|&w| mask.is_foreground(w) != mask.is_foreground(v)) {
            out.insert(v);
        }
    }
    out
}

/// Rounds of [`refine_boundary`] before giving up on a fixed point.
pub const REFINE_MAX_ROUNDS: usize = 25;

/// Relabels the band of `k` hops around the boundary by local histograms,
/// then applies one majority filter over closed neighbourhoods in the band.
/// Rounds repeat on the new boundary until the mask stops changing, so the
/// result is a fixed point unless `REFINE_MAX_ROUNDS` runs out.
pub fn refine_boundary(
    graph: &DelaunayGraph,
    features: &FeatureField,
    mask: &SegmentationMask,
    k: usize,
    params: &HistogramParams,
) -> Result<SegmentationMask> {
    if mask.len() != graph.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_vertices(),
            found: mask.len(),
        });
    }
    let mut current = mask.clone();
    for _ in 0..REFINE_MAX_ROUNDS {
        let next = refine_round(graph, features, &current, k, params)?;
        if next == current {
            break;
        }
        current = next;
    }
    Ok(current)
}

fn refine_round(
    graph: &DelaunayGraph,
    features: &FeatureField,
    mask: &SegmentationMask,
    k: usize,
    params: &HistogramParams,
) -> Result<SegmentationMask> {
    if k == 0 {
        return Ok(mask.clone());
    }
    let boundary = mask_boundary(graph, mask);
    if boundary.is_empty() {
        return Ok(mask.clone());
    }
    let band = hop_neighborhood(graph, &boundary, k);
    let near_f = VertexSet::from_indices(graph.num_vertices(), band.iter().filter(|&v| mask.is_foreground(v)));
    let near_b = VertexSet::from_indices(graph.num_vertices(), band.iter().filter(|&v| !mask.is_foreground(v)));
    let hist = train_histograms(features, &near_f, &near_b, params)?;

    let mut relabeled = mask.clone();
    for v in band.iter() {
        let bin = hist.bin_of(features.at(v));
        relabeled.set(v, hist.foreground[bin] >= hist.background[bin]);
    }
    let mut out = relabeled.clone();
    for v in band.iter() {
        let nb = graph.neighbors(v);
        let fg = nb.iter().filter(|&&w| relabeled.is_foreground(w)).count() + relabeled.is_foreground(v) as usize;
        let total = nb.len() + 1;
        if 2 * fg > total {
            out.set(v, true);
        } else if 2 * fg < total {
            out.set(v, false);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_grid_graph;
    use proptest::prelude::*;

    fn color_field(g: &DelaunayGraph, colors: &[[f64; 3]]) -> FeatureField {
        FeatureField::new(g, 3, colors.iter().flatten().copied().collect()).unwrap()
    }

    #[test]
    fn single_bin_without_smoothing() {
        let g = build_grid_graph(2, 2).unwrap();
        let f = color_field(&g, &[[0.1, 0.1, 0.1], [0.1, 0.1, 0.1], [0.9, 0.9, 0.9], [0.9, 0.9, 0.9]]);
        let p = HistogramParams { bins: 4, smoothing: 0.0 };
        let h = train_histograms(&f, &VertexSet::from_indices(4, [0, 1]), &VertexSet::from_indices(4, [2, 3]), &p).unwrap();
        let bin = h.bin_of(&[0.1, 0.1, 0.1]);
        assert_eq!(bin, 0);
        assert_eq!(h.foreground()[bin], 1.0);
        assert_eq!(h.foreground().iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(h.foreground().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn uniform_samples_give_flat_histogram() {
        let g = build_grid_graph(2, 4).unwrap();
        let mut colors = Vec::new();
        for r in 0..2 {
            for gch in 0..2 {
                for b in 0..2 {
                    colors.push([0.25 + 0.5 * r as f64, 0.25 + 0.5 * gch as f64, 0.25 + 0.5 * b as f64]);
                }
            }
        }
        let f = color_field(&g, &colors);
        let all = VertexSet::full(8);
        let h = train_histograms(&f, &all, &all, &HistogramParams { bins: 2, smoothing: 0.0 }).unwrap();
        assert!(h.foreground().iter().all(|&p| p == 1.0 / 8.0));
    }

    #[test]
    fn hand_binned_counts() {
        let g = build_grid_graph(2, 4).unwrap();
        let colors = [
            [0.1, 0.2, 0.3],
            [0.6, 0.2, 0.3],
            [0.6, 0.7, 0.3],
            [0.6, 0.7, 0.8],
            [0.1, 0.1, 0.1],
            [0.9, 0.9, 0.9],
            [1.0, 0.0, 0.5],
            [0.49, 0.5, 0.0],
        ];
        let f = color_field(&g, &colors);
        let all = VertexSet::full(8);
        let h = train_histograms(&f, &all, &all, &HistogramParams { bins: 2, smoothing: 0.0 }).unwrap();
        // bins (r,g,b) -> index 4r + 2g + b
        let mut expected = [0.0; 8];
        for idx in [0, 4, 6, 7, 0, 7, 5, 2] {
            expected[idx] += 1.0 / 8.0;
        }
        assert_eq!(h.foreground(), &expected);
    }

    #[test]
    fn training_requires_samples() {
        let g = build_grid_graph(2, 2).unwrap();
        let f = FeatureField::gray(&g, vec![0.0; 4]).unwrap();
        let p = HistogramParams::default();
        let err = train_histograms(&f, &VertexSet::empty(4), &VertexSet::full(4), &p).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
        assert!(train_histograms(&f, &VertexSet::full(4), &VertexSet::empty(4), &p).is_err());
    }

    #[test]
    fn likelihood_examples() {
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(1.0) - 0.7310585786300049).abs() < 1e-15);
        assert!(logistic(1e4 * 0.1) > 1.0 - 1e-12);

        let g = build_grid_graph(2, 2).unwrap();
        let f = FeatureField::gray(&g, vec![0.1, 0.1, 0.9, 0.9]).unwrap();
        let fg = VertexSet::from_indices(4, [0, 1, 2]);
        let bg = VertexSet::from_indices(4, [2, 3]);
        let h = train_histograms(&f, &fg, &bg, &HistogramParams { bins: 2, smoothing: 1.0 }).unwrap();
        let lf = likelihood_field(&h, &f, 1.0).unwrap();
        // H_F = (2+1)/5 and (1+1)/5; H_B = 1/4 and 3/4
        assert!((lf.log_ratio[0] - (0.6f64 / 0.25).ln()).abs() < 1e-15);
        assert!((lf.log_ratio[3] - (0.4f64 / 0.75).ln()).abs() < 1e-15);
        for v in 0..4 {
            assert!(lf.likelihood[v] > 0.0 && lf.likelihood[v] < 1.0);
            assert_eq!(lf.log_ratio[v] > 0.0, lf.foreground[v] > lf.background[v]);
        }
        let same = train_histograms(&f, &fg, &fg, &HistogramParams::default()).unwrap();
        let lf = likelihood_field(&same, &f, 5.0).unwrap();
        assert!(lf.likelihood.iter().all(|&l| l == 0.5));
    }

    #[test]
    fn roi_outside_joins_background() {
        let g = build_grid_graph(5, 5).unwrap();
        let roi = Polygon::closed(vec![[0.1, 0.1], [0.9, 0.1], [0.9, 0.9], [0.1, 0.9]]).unwrap();
        let s = SeedLabeling::new(&g, VertexSet::from_indices(25, [12]), VertexSet::empty(25), Some(roi)).unwrap();
        assert_eq!(s.background().len(), 16);
        assert_eq!(s.undefined().len(), 8);
        let clash = SeedLabeling::new(&g, VertexSet::from_indices(25, [3]), VertexSet::from_indices(25, [3]), None);
        assert!(clash.is_err());
    }

    /// Two-colour image: a disk of one colour on a background of another.
    fn disk_image(n: usize, radius: f64) -> (DelaunayGraph, FeatureField, Vec<bool>) {
        let g = build_grid_graph(n, n).unwrap();
        let mut colors = Vec::new();
        let mut truth = Vec::new();
        for p in g.points() {
            let inside = (p[0] - 0.5).hypot(p[1] - 0.5) < radius;
            truth.push(inside);
            colors.push(if inside { [0.85, 0.2, 0.2] } else { [0.15, 0.3, 0.75] });
        }
        let f = color_field(&g, &colors);
        (g, f, truth)
    }

    #[test]
    fn refinement_is_fixed_point_on_consistent_mask() {
        let (g, f, truth) = disk_image(24, 0.3);
        let m = SegmentationMask::new(truth);
        let once = refine_boundary(&g, &f, &m, 2, &HistogramParams::default()).unwrap();
        let twice = refine_boundary(&g, &f, &once, 2, &HistogramParams::default()).unwrap();
        assert_eq!(once, twice);
        assert_eq!(refine_boundary(&g, &f, &m, 0, &HistogramParams::default()).unwrap(), m);
    }

    #[test]
    fn median_flips_isolated_vertex() {
        let g = build_grid_graph(7, 7).unwrap();
        let f = FeatureField::gray(&g, vec![0.5; 49]).unwrap();
        let mut labels = vec![true; 49];
        labels[24] = false;
        let out = refine_boundary(&g, &f, &SegmentationMask::new(labels), 1, &HistogramParams::default()).unwrap();
        assert!(out.labels().iter().all(|&l| l));
    }

    #[test]
    fn two_colour_disk_is_segmented() {
        let (g, f, truth) = disk_image(40, 0.3);
        let fg = VertexSet::from_indices(
            g.num_vertices(),
            (0..g.num_vertices()).filter(|&v| (g.point(v)[0] - 0.5).hypot(g.point(v)[1] - 0.5) < 0.22),
        );
        let bg = VertexSet::from_indices(
            g.num_vertices(),
            (0..g.num_vertices()).filter(|&v| (g.point(v)[0] - 0.5).hypot(g.point(v)[1] - 0.5) > 0.38),
        );
        let seeds = SeedLabeling::new(&g, fg, bg, None).unwrap();
        let out = gar_run(&g, &f, &seeds, &GarParams::default()).unwrap();
        let unknown = seeds.undefined();
        let wrong = unknown.iter().filter(|&v| out.mask.is_foreground(v) != truth[v]).count();
        assert!(wrong as f64 <= 0.01 * unknown.len() as f64, "{wrong} of {}", unknown.len());
        for v in seeds.foreground().iter() {
            assert!(out.mask.is_foreground(v));
        }
    }

    #[test]
    fn full_foreground_seeds_converge_at_once() {
        let (g, f, _) = disk_image(16, 0.3);
        let roi = Polygon::closed(vec![[0.2, 0.2], [0.8, 0.2], [0.8, 0.8], [0.2, 0.8]]).unwrap();
        let inside = VertexSet::from_indices(g.num_vertices(), (0..g.num_vertices()).filter(|&v| roi.contains(g.point(v))));
        let seeds = SeedLabeling::new(&g, inside.clone(), VertexSet::empty(g.num_vertices()), Some(roi)).unwrap();
        let out = gar_run(&g, &f, &seeds, &GarParams::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.mask.to_vertex_set(), inside);
    }

    #[test]
    fn indistinct_colours_do_not_flood() {
        let g = build_grid_graph(24, 24).unwrap();
        let f = color_field(&g, &vec![[0.4, 0.4, 0.4]; g.num_vertices()]);
        let near = |v: usize, r: f64| (g.point(v)[0] - 0.5).hypot(g.point(v)[1] - 0.5) < r;
        let fg = VertexSet::from_indices(g.num_vertices(), (0..g.num_vertices()).filter(|&v| near(v, 0.1)));
        let bg = VertexSet::from_indices(g.num_vertices(), (0..g.num_vertices()).filter(|&v| !near(v, 0.45)));
        let seeds = SeedLabeling::new(&g, fg.clone(), bg, None).unwrap();
        let params = GarParams { beta: 0.1, max_outer: 2, ..GarParams::default() };
        let out = gar_run(&g, &f, &seeds, &params).unwrap();
        let grown = hop_neighborhood(&g, &fg, 6);
        assert!(out.mask.to_vertex_set().iter().all(|v| grown.contains(v)));
    }

    proptest! {
        #[test]
        fn histograms_are_normalised(values in prop::collection::vec(0.0f64..=1.0, 48), split in 1usize..15, s in 0.1f64..3.0) {
            let g = build_grid_graph(4, 4).unwrap();
            let f = FeatureField::new(&g, 3, values).unwrap();
            let fg = VertexSet::from_indices(16, 0..split);
            let h = train_histograms(&f, &fg, &fg.complement(), &HistogramParams { bins: 4, smoothing: s }).unwrap();
            prop_assert!((h.foreground().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((h.background().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let lf = likelihood_field(&h, &f, 5.0).unwrap();
            for v in 0..16 {
                prop_assert!(lf.likelihood[v] > 0.0 && lf.likelihood[v] < 1.0);
                prop_assert_eq!(lf.log_ratio[v] > 0.0, lf.foreground[v] > lf.background[v]);
            }
        }

        #[test]
        fn reassignment_is_scale_invariant(a in 1e-6f64..1.0, b in 1e-6f64..1.0, k in 1e-3f64..1e3) {
            prop_assert_eq!(a >= b, a * k >= b * k);
        }
    }
}
