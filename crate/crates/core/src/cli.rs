//! Command-line front end.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{format_scaling, format_subsample, scaling_bench, subsample_bench};
use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolveOutcome, Snapshot, Stepper, TimeSchedule};
use crate::fem::MassMode;
use crate::gar::{gar_run, GarParams, HistogramParams};
use crate::graph::{signed_distance_init, DelaunayGraph, GridShape, Polygon};
use crate::io::{
    load_image, read_config, read_graph, read_mask, read_polygons, read_snapshot, read_trimap, write_contour, write_mask,
    write_snapshot, write_snapshots, Trimap,
};
use crate::metrics::{MetricsReport, SegmentationMask};
use crate::models::{ContourModel, FeatureField, ModelKind, ModelParams};
use crate::narrowband::{constrained_evolve, BandMode};
use crate::solver::SolverKind;
use crate::synthetic::color_scene;

/// Every tunable of a run. Unset fields take the module defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Option<ModelKind>,
    pub params: ModelParams,
    pub dt: Option<f64>,
    /// Explicit steps default to `dt_factor / N^2`.
    pub dt_factor: f64,
    pub max_steps: usize,
    pub window: usize,
    /// Also require a unit-speed front to cross one mean edge before stopping.
    pub front_window: bool,
    pub mass: MassMode,
    pub solver: SolverKind,
    pub stepper: Stepper,
    pub narrowband: bool,
    pub band: BandMode,
    pub snapshot_every: usize,
    pub histogram: HistogramParams,
    pub alpha: f64,
    pub agreement: f64,
    pub max_outer: usize,
    pub band_hops: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let gar = GarParams::default();
        RunConfig {
            model: None,
            params: ModelParams::default(),
            dt: None,
            dt_factor: 1.0,
            max_steps: 10_000,
            window: 10,
            front_window: true,
            mass: MassMode::Lumped,
            solver: SolverKind::Auto,
            stepper: Stepper::Implicit,
            narrowband: false,
            band: BandMode::General,
            snapshot_every: 0,
            histogram: gar.histogram,
            alpha: gar.alpha,
            agreement: gar.agreement,
            max_outer: gar.max_outer,
            band_hops: gar.band_hops,
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidParameter(format!("invalid value '{value}' for '{key}'"))),
    }
}

impl RunConfig {
    /// Sets one `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.params;
        match key {
            "model" => self.model = Some(value.parse()?),
            "speed" => p.speed = parse(key, value)?,
            "lambda" => p.lambda = parse(key, value)?,
            "beta" => p.beta = parse(key, value)?,
            "mu" => p.mu = parse(key, value)?,
            "nu" => p.nu = parse(key, value)?,
            "lambda1" => p.lambda1 = parse(key, value)?,
            "lambda2" => p.lambda2 = parse(key, value)?,
            "eps" => p.eps_grad = Some(parse(key, value)?),
            "dt" => self.dt = Some(parse(key, value)?),
            "dt_factor" => self.dt_factor = parse(key, value)?,
            "max_steps" => self.max_steps = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "front_window" => self.front_window = parse_bool(key, value)?,
            "mass" => self.mass = value.parse()?,
            "solver" => self.solver = value.parse()?,
            "stepper" => self.stepper = value.parse()?,
            "narrowband" => self.narrowband = parse_bool(key, value)?,
            "band" => self.band = value.parse()?,
            "snapshot_every" => self.snapshot_every = parse(key, value)?,
            "bins" => self.histogram.bins = parse(key, value)?,
            "smoothing" => self.histogram.smoothing = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "agreement" => self.agreement = parse(key, value)?,
            "max_outer" => self.max_outer = parse(key, value)?,
            "band_hops" => self.band_hops = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            other => return Err(Error::InvalidParameter(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    /// Config file entries first, then `overrides` in order.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            for (k, v, at) in read_config(path)? {
                cfg.set(&k, &v).map_err(|e| Error::format(path, at, e.to_string()))?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.gar_params(None).validate()?;
        if !(self.dt_factor > 0.0 && self.dt_factor.is_finite()) {
            return Err(Error::InvalidParameter("dt_factor must be positive".into()));
        }
        if self.dt.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if self.window == 0 {
            return Err(Error::InvalidParameter("window must be at least 1".into()));
        }
        Ok(())
    }

    /// Schedule for full (`narrowband == false`) or narrow-band evolution.
    pub fn schedule(&self, graph: &DelaunayGraph) -> TimeSchedule {
        let n = graph.num_vertices();
        let mut s = match (self.narrowband, self.stepper) {
            (true, _) => TimeSchedule::narrowband_default(n),
            (false, Stepper::Explicit) => TimeSchedule::explicit_default(n, self.dt_factor),
            (false, Stepper::Implicit) => TimeSchedule::implicit_default(n),
        };
        if let Some(dt) = self.dt {
            s.dt = dt;
        }
        s.max_steps = self.max_steps;
        s.window = self.window;
        s.mass = self.mass;
        s.solver.kind = self.solver;
        s.snapshot_every = self.snapshot_every;
        if self.front_window {
            s = s.with_front_window(graph);
        }
        s
    }

    pub fn gar_params(&self, graph: Option<&DelaunayGraph>) -> GarParams {
        GarParams {
            histogram: self.histogram,
            alpha: self.alpha,
            lambda: self.params.lambda,
            beta: self.params.beta,
            agreement: self.agreement,
            max_outer: self.max_outer,
            band_hops: self.band_hops,
            schedule: match (graph, self.dt) {
                (Some(g), Some(_)) => Some(RunConfig { narrowband: true, ..self.clone() }.schedule(g)),
                _ => None,
            },
        }
    }
}

/// Full or narrow-band evolution according to `cfg`.
pub fn run_evolution(
    graph: &DelaunayGraph,
    features: Option<&FeatureField>,
    c0: &[f64],
    cfg: &RunConfig,
    default_model: ModelKind,
) -> Result<EvolveOutcome> {
    let kind = cfg.model.unwrap_or(default_model);
    if kind == ModelKind::Gar {
        return Err(Error::InvalidParameter("the region-driven model needs seeds; use segment-image with a trimap".into()));
    }
    let mut model = ContourModel::from_params(kind, cfg.params, features, None)?;
    let schedule = cfg.schedule(graph);
    let out = if cfg.narrowband {
        constrained_evolve(graph, &mut model, c0, &schedule, cfg.band)?
    } else {
        evolve(graph, &mut model, c0, &schedule, cfg.stepper)?
    };
    Ok(out)
}

/// Rectangle inset by 5% of the graph's bounding box.
fn default_contour(graph: &DelaunayGraph) -> Result<Polygon> {
    let (mut x1, mut y1) = (0.0f64, 0.0f64);
    for p in graph.points() {
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let (dx, dy) = (0.05 * x1, 0.05 * y1);
    Polygon::closed(vec![[dx, dy], [x1 - dx, dy], [x1 - dx, y1 - dy], [dx, y1 - dy]])
}

fn initial_state(graph: &DelaunayGraph, init: Option<&Path>, polygon: Option<&Path>) -> Result<Vec<f64>> {
    match (init, polygon) {
        (Some(path), _) => {
            let s = read_snapshot(path)?;
            if s.c.len() != graph.num_vertices() {
                return Err(Error::format(
                    path,
                    0,
                    format!("state has {} coefficients, graph has {} vertices", s.c.len(), graph.num_vertices()),
                ));
            }
            Ok(s.c)
        }
        (None, Some(path)) => signed_distance_init(graph, &read_polygons(path)?),
        (None, None) => signed_distance_init(graph, &[default_contour(graph)?]),
    }
}

#[derive(Debug, Parser)]
#[command(name = "fe-contours", version, about = "Finite-element level-set active contours on Delaunay graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment an image, by default with colour seeds from a trimap.
    SegmentImage(SegmentImage),
    /// Run a contour model on a graph file from an initial polygon.
    SegmentGraph(SegmentGraph),
    /// Evolve a level-set function and write the final state.
    Evolve(EvolveCmd),
    /// Compare a segmentation mask against a ground truth.
    Metrics(MetricsCmd),
    /// Segment on random subsets of an image's pixels at several factors.
    SubsampleBench(SubsampleCmd),
    /// Per-step time of full versus narrow-band evolution across grid sizes.
    ScalingBench(ScalingCmd),
}

/// Settings shared by every run; each one is also a config-file key.
#[derive(Debug, Args, Default)]
pub struct Settings {
    /// `key = value` configuration file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Additional `key=value` setting (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// erosion, geometric, geodesic, acwe or gar.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long = "max-steps", visible_alias = "steps")]
    pub max_steps: Option<String>,
    #[arg(long)]
    pub window: Option<String>,
    /// explicit or implicit.
    #[arg(long)]
    pub stepper: Option<String>,
    /// lumped or consistent.
    #[arg(long)]
    pub mass: Option<String>,
    /// auto, cg or banded.
    #[arg(long)]
    pub solver: Option<String>,
    /// Evolve only the band of active points.
    #[arg(long)]
    pub narrowband: bool,
    /// general, expanding or shrinking.
    #[arg(long)]
    pub band: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub speed: Option<String>,
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub nu: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
}

impl Settings {
    fn overrides(&self) -> std::result::Result<Vec<(String, String)>, String> {
        let mut out = Vec::new();
        let named = [
            ("model", &self.model),
            ("dt", &self.dt),
            ("max_steps", &self.max_steps),
            ("window", &self.window),
            ("stepper", &self.stepper),
            ("mass", &self.mass),
            ("solver", &self.solver),
            ("band", &self.band),
            ("lambda", &self.lambda),
            ("beta", &self.beta),
            ("speed", &self.speed),
            ("mu", &self.mu),
            ("nu", &self.nu),
            ("alpha", &self.alpha),
            ("seed", &self.seed),
        ];
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        for (k, v) in named {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        }
        if self.narrowband {
            out.push(("narrowband".into(), "true".into()));
        }
        Ok(out)
    }

    fn resolve(&self) -> std::result::Result<RunConfig, Failure> {
        let overrides = self.overrides().map_err(Failure::Usage)?;
        RunConfig::load(self.config.as_deref(), &overrides).map_err(|e| match e {
            Error::InvalidParameter(m) => Failure::Usage(m),
            other => Failure::Runtime(other),
        })
    }
}

#[derive(Debug, Args)]
pub struct SegmentImage {
    #[arg(long)]
    pub image: PathBuf,
    /// Seeds: 0 background, 128 unknown, 255 foreground.
    #[arg(long)]
    pub trimap: Option<PathBuf>,
    /// Region of interest polygon in unit coordinates.
    #[arg(long)]
    pub roi: Option<PathBuf>,
    /// Initial contour for non-seeded models.
    #[arg(long)]
    pub polygon: Option<PathBuf>,
    /// Output mask (P5, 255 = foreground).
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub contour: Option<PathBuf>,
    /// Ground truth to score the result against.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct SegmentGraph {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub polygon: Option<PathBuf>,
    /// Output mask, one pixel per vertex.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub contour: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct EvolveCmd {
    #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Initial state in snapshot format.
    #[arg(long, conflicts_with = "polygon")]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub polygon: Option<PathBuf>,
    /// Final state in snapshot format.
    #[arg(long)]
    pub output: PathBuf,
    /// Directory for trajectory snapshots.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<String>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub contour: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct MetricsCmd {
    #[arg(long)]
    pub seg: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Scores only the unknown (128) pixels of this trimap.
    #[arg(long)]
    pub trimap: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SubsampleCmd {
    /// Colour image; a synthetic scene is used when absent.
    #[arg(long, requires_all = ["trimap", "gt"])]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub trimap: Option<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Subsampling factor (repeatable); defaults to 64, 16, 4 and 1.
    #[arg(long = "factor")]
    pub factors: Vec<usize>,
    /// Side of the synthetic scene.
    #[arg(long, default_value_t = 96)]
    pub size: usize,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct ScalingCmd {
    /// Grid sides (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [32, 64, 128])]
    pub sizes: Vec<usize>,
    /// Timed steps per size.
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
}

/// Why a command failed: bad usage (exit 1) or a runtime error (exit 2).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn emit(out: &mut dyn std::io::Write, text: &str) -> CmdResult {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Runtime(Error::io("<stdout>", e)))
}

fn segment_image(cmd: &SegmentImage, out: &mut dyn std::io::Write) -> CmdResult {
    let cfg = cmd.settings.resolve()?;
    let (image, graph, features) = load_image(&cmd.image)?;
    let kind = cfg.model.unwrap_or(ModelKind::Gar);
    let shape = graph.grid_shape();
    let mut trimap: Option<Trimap> = None;
    let mask = if kind == ModelKind::Gar {
        let path = cmd
            .trimap
            .as_ref()
            .ok_or_else(|| Failure::Usage("the gar model needs --trimap".into()))?;
        let t = read_trimap(path, Some((image.width(), image.height())))?;
        let roi = match &cmd.roi {
            Some(p) => Some(read_polygons(p)?.remove(0)),
            None => None,
        };
        let seeds = t.to_seeds(&graph, roi)?;
        trimap = Some(t);
        let result = gar_run(&graph, &features, &seeds, &cfg.gar_params(Some(&graph)))?;
        emit(
            out,
            &format!(
                "iterations {} converged {} monotone {}\n",
                result.iterations, result.converged, result.monotone
            ),
        )?;
        result.mask
    } else {
        let c0 = initial_state(&graph, None, cmd.polygon.as_deref())?;
        let result = run_evolution(&graph, Some(&features), &c0, &cfg, kind)?;
        emit(out, &format!("steps {} converged {}\n", result.steps, result.converged))?;
        SegmentationMask::from_level_set(&result.state.c)
    };
    write_mask(&cmd.output, &mask, shape)?;
    if let Some(p) = &cmd.contour {
        write_contour(p, &graph, &mask)?;
    }
    if let Some(gt_path) = &cmd.gt {
        let (gt, _) = read_mask(gt_path)?;
        let eval = trimap.as_ref().map(Trimap::unknown);
        let report = MetricsReport::compute(&mask, &gt, eval.as_ref())?;
        emit(out, &format!("{report}\n"))?;
    }
    Ok(())
}

fn segment_graph(cmd: &SegmentGraph, out: &mut dyn std::io::Write) -> CmdResult {
    let cfg = cmd.settings.resolve()?;
    let gf = read_graph(&cmd.graph)?;
    let c0 = initial_state(&gf.graph, None, cmd.polygon.as_deref())?;
    let result = run_evolution(&gf.graph, gf.features.as_ref(), &c0, &cfg, ModelKind::Geodesic)?;
    let mask = SegmentationMask::from_level_set(&result.state.c);
    write_mask(&cmd.output, &mask, gf.graph.grid_shape())?;
    if let Some(p) = &cmd.contour {
        write_contour(p, &gf.graph, &mask)?;
    }
    emit(
        out,
        &format!(
            "steps {} converged {} inside {}\n",
            result.steps,
            result.converged,
            mask.foreground_count()
        ),
    )
}

fn evolve_cmd(cmd: &EvolveCmd, out: &mut dyn std::io::Write) -> CmdResult {
    let mut cfg = cmd.settings.resolve()?;
    if let Some(k) = &cmd.snapshot_every {
        cfg.set("snapshot_every", k).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if cmd.snapshots.is_some() && cfg.snapshot_every == 0 {
        cfg.snapshot_every = 1;
    }
    let (graph, features, shape): (DelaunayGraph, Option<FeatureField>, Option<GridShape>) = match (&cmd.image, &cmd.graph) {
        (Some(p), _) => {
            let (_, g, f) = load_image(p)?;
            let shape = g.grid_shape();
            (g, Some(f), shape)
        }
        (None, Some(p)) => {
            let gf = read_graph(p)?;
            let shape = gf.graph.grid_shape();
            (gf.graph, gf.features, shape)
        }
        (None, None) => return Err(Failure::Usage("one of --image or --graph is required".into())),
    };
    let c0 = initial_state(&graph, cmd.init.as_deref(), cmd.polygon.as_deref())?;
    let result = run_evolution(&graph, features.as_ref(), &c0, &cfg, ModelKind::Geodesic)?;
    let last = Snapshot {
        step: result.steps,
        t: result.state.t,
        c: result.state.c.clone(),
    };
    write_snapshot(&cmd.output, &last)?;
    if let Some(dir) = &cmd.snapshots {
        write_snapshots(dir, &result.snapshots)?;
    }
    let mask = SegmentationMask::from_level_set(&result.state.c);
    if let Some(p) = &cmd.mask {
        write_mask(p, &mask, shape)?;
    }
    if let Some(p) = &cmd.contour {
        write_contour(p, &graph, &mask)?;
    }
    let mut line = format!("steps {} converged {} t {}", result.steps, result.converged, result.state.t);
    if let Some(a) = result.mean_active {
        line.push_str(&format!(" mean_active {a:.1}"));
    }
    emit(out, &(line + "\n"))
}

fn metrics_cmd(cmd: &MetricsCmd, out: &mut dyn std::io::Write) -> CmdResult {
    let (seg, seg_img) = read_mask(&cmd.seg)?;
    let (gt, gt_img) = read_mask(&cmd.gt)?;
    if (seg_img.width(), seg_img.height()) != (gt_img.width(), gt_img.height()) {
        return Err(Failure::Runtime(Error::format(
            &cmd.seg,
            0,
            format!(
                "mask is {}x{} but the ground truth is {}x{}",
                seg_img.width(),
                seg_img.height(),
                gt_img.width(),
                gt_img.height()
            ),
        )));
    }
    let eval = match &cmd.trimap {
        Some(p) => Some(read_trimap(p, Some((gt_img.width(), gt_img.height())))?.unknown()),
        None => None,
    };
    let report = MetricsReport::compute(&seg, &gt, eval.as_ref())?;
    emit(out, &format!("{report}\n{}", report.key_values()))
}

fn subsample_cmd(cmd: &SubsampleCmd, out: &mut dyn std::io::Write) -> CmdResult {
    let cfg = cmd.settings.resolve()?;
    let (image, trimap, truth) = match (&cmd.image, &cmd.trimap, &cmd.gt) {
        (Some(i), Some(t), Some(g)) => {
            let (image, _, _) = load_image(i)?;
            let trimap = read_trimap(t, Some((image.width(), image.height())))?;
            let (truth, _) = read_mask(g)?;
            (image, trimap, truth)
        }
        (None, _, _) => color_scene(cmd.size, 3, cfg.seed)?,
        _ => return Err(Failure::Usage("--image needs --trimap and --gt".into())),
    };
    let factors = if cmd.factors.is_empty() { vec![64, 16, 4, 1] } else { cmd.factors.clone() };
    let rows = subsample_bench(&image, &trimap, &truth, &factors, cfg.seed, &cfg.gar_params(None))?;
    emit(out, &format_subsample(&rows))
}

fn scaling_cmd(cmd: &ScalingCmd, out: &mut dyn std::io::Write) -> CmdResult {
    if cmd.sizes.iter().any(|&n| n < 2) {
        return Err(Failure::Usage("grid sizes must be at least 2".into()));
    }
    let rows = scaling_bench(&cmd.sizes, cmd.steps)?;
    emit(out, &format_scaling(&rows))
}

/// Runs a parsed command, writing reports to `out`.
pub fn execute(cli: &Cli, out: &mut dyn std::io::Write) -> CmdResult {
    match &cli.command {
        Command::SegmentImage(c) => segment_image(c, out),
        Command::SegmentGraph(c) => segment_graph(c, out),
        Command::Evolve(c) => evolve_cmd(c, out),
        Command::Metrics(c) => metrics_cmd(c, out),
        Command::SubsampleBench(c) => subsample_cmd(c, out),
        Command::ScalingBench(c) => scaling_cmd(c, out),
    }
}

/// Caps the worker pool at `GC_THREADS` when set.
fn configure_threads() -> std::result::Result<(), String> {
    if let Ok(v) = std::env::var("GC_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("GC_THREADS must be a positive integer, got '{v}'"))?;
        // A pool may already exist when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 on usage errors, 2 on runtime errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(m) = configure_threads() {
        eprintln!("error: {m}");
        return 1;
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let result = execute(&cli, &mut lock);
    let _ = lock.flush();
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}
