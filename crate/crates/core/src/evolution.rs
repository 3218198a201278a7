//! Time integration of `A(c) dc/dt = b(c)` over the whole graph.

use std::fmt;

use crate::error::{Error, Result};
use crate::fem::{assemble_a, assemble_k_h, MassMode, TriangleCoefficients};
use crate::graph::DelaunayGraph;
use crate::models::ContourModel;
use crate::solver::{solve_sparse, SolverOptions};

/// Source of frozen per-triangle coefficients.
pub trait CoefficientField: Sync {
    fn coefficient(&self, graph: &DelaunayGraph, c: &[f64], t: usize) -> TriangleCoefficients;

    fn coefficients(&self, graph: &DelaunayGraph, c: &[f64]) -> Vec<TriangleCoefficients> {
        (0..graph.num_triangles()).map(|t| self.coefficient(graph, c, t)).collect()
    }

    /// Called once before an evolution starts, with the saturation bound.
    fn prepare(&mut self, _graph: &DelaunayGraph, _c: &[f64], _r: f64) -> Result<()> {
        Ok(())
    }

    /// Called after every accepted full step.
    fn refresh(&mut self, _c: &[f64]) -> Result<()> {
        Ok(())
    }

    /// Called when vertex `v` crosses between inside (`c <= 0`) and outside.
    fn sign_changed(&mut self, _v: usize, _now_inside: bool) {}
}

impl CoefficientField for ContourModel {
    fn coefficient(&self, graph: &DelaunayGraph, c: &[f64], t: usize) -> TriangleCoefficients {
        self.eval_coefficients(graph, c, t)
    }

    fn coefficients(&self, graph: &DelaunayGraph, c: &[f64]) -> Vec<TriangleCoefficients> {
        self.eval_all(graph, c)
    }

    fn prepare(&mut self, graph: &DelaunayGraph, c: &[f64], r: f64) -> Result<()> {
        self.calibrate(graph, r);
        self.update_region_means(c)
    }

    fn refresh(&mut self, c: &[f64]) -> Result<()> {
        self.update_region_means(c)
    }

    fn sign_changed(&mut self, v: usize, now_inside: bool) {
        self.move_vertex_region(v, now_inside);
    }
}

/// The same coefficients on every triangle, independent of `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantCoefficients(pub TriangleCoefficients);

impl CoefficientField for ConstantCoefficients {
    fn coefficient(&self, _: &DelaunayGraph, _: &[f64], _: usize) -> TriangleCoefficients {
        self.0
    }
}

/// Coefficient vector with its saturation bound and elapsed time.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetState {
    pub c: Vec<f64>,
    /// Saturation bound, `max |c0|` at initialisation.
    pub r: f64,
    pub t: f64,
}

impl LevelSetState {
    pub fn new(c: Vec<f64>) -> Self {
        let r = c.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        LevelSetState { c, r, t: 0.0 }
    }

    /// Vertices with `c <= 0`.
    pub fn inside_mask(&self) -> Vec<bool> {
        self.c.iter().map(|&v| v <= 0.0).collect()
    }
}

/// Step size, stopping rule and linear-algebra settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSchedule {
    pub dt: f64,
    pub max_steps: usize,
    /// Number of consecutive steps with an unchanged sign pattern that
    /// counts as convergence.
    pub window: usize,
    /// Additional lower bound on the stable stretch measured in time units.
    /// Zero means the step count alone decides.
    pub min_stable_time: f64,
    pub mass: MassMode,
    pub solver: SolverOptions,
    /// Fixed-point tolerance of the implicit step.
    pub picard_tol: f64,
    pub picard_max: usize,
    /// Keep every k-th state in the trajectory (0 disables snapshots).
    pub snapshot_every: usize,
}

impl TimeSchedule {
    pub fn new(dt: f64) -> Self {
        TimeSchedule {
            dt,
            max_steps: 10_000,
            window: 10,
            min_stable_time: 0.0,
            mass: MassMode::Lumped,
            solver: SolverOptions::default(),
            picard_tol: 1e-9,
            picard_max: 20,
            snapshot_every: 0,
        }
    }

    /// `factor / N^2` for the explicit scheme on `n` vertices.
    pub fn explicit_default(n: usize, factor: f64) -> Self {
        TimeSchedule::new(factor / (n as f64 * n as f64))
    }

    /// `1 / N` for the implicit scheme.
    pub fn implicit_default(n: usize) -> Self {
        TimeSchedule::new(1.0 / n as f64)
    }

    /// `0.25 / N` for saturated narrow-band evolution.
    pub fn narrowband_default(n: usize) -> Self {
        TimeSchedule::new(0.25 / n as f64)
    }

    /// Requires the sign pattern to hold for at least the time a unit-speed
    /// front needs to cross one mean edge of `graph`.
    pub fn with_front_window(mut self, graph: &DelaunayGraph) -> Self {
        self.min_stable_time = graph.mean_edge_length();
        self
    }

    /// True once `steps` stable steps of size `dt` satisfy both bounds.
    pub fn is_stable(&self, steps: usize, dt: f64) -> bool {
        steps >= self.window && steps as f64 * dt >= self.min_stable_time
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.solver.tol > 0.0) || !(self.picard_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if self.window == 0 {
            return Err(Error::InvalidParameter("convergence window must be at least 1".into()));
        }
        if !(self.min_stable_time >= 0.0 && self.min_stable_time.is_finite()) {
            return Err(Error::InvalidParameter("minimum stable time must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stepper {
    #[default]
    Explicit,
    Implicit,
}

impl std::str::FromStr for Stepper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Stepper::Explicit),
            "implicit" => Ok(Stepper::Implicit),
            other => Err(Error::InvalidParameter(format!("unknown stepper '{other}'"))),
        }
    }
}

/// `c_{k+1} = c_k + dt A(c_k)^{-1} b(c_k)`.
pub fn explicit_euler_step<M: CoefficientField + ?Sized>(
    graph: &DelaunayGraph,
    model: &M,
    state: &LevelSetState,
    schedule: &TimeSchedule,
) -> Result<LevelSetState> {
    check_state(graph, state)?;
    let coeffs = model.coefficients(graph, &state.c);
    let a = assemble_a(graph, &coeffs, schedule.mass)?;
    let (k, h) = assemble_k_h(graph, &coeffs)?;
    let kc = k.mul_vec(&state.c);
    let b: Vec<f64> = h.iter().zip(&kc).map(|(h, kc)| h - kc).collect();
    let x = solve_sparse(&a, &b, &schedule.solver)?;
    Ok(LevelSetState {
        c: state.c.iter().zip(&x).map(|(c, x)| c + schedule.dt * x).collect(),
        r: state.r,
        t: state.t + schedule.dt,
    })
}

/// Backward Euler step by Picard iteration.
///
/// Each inner iteration freezes the coefficients at the latest iterate `x`
/// and solves `(A(x) + dt K(x)) y = A(x) c_k + dt h(x)`.
pub fn implicit_euler_step<M: CoefficientField + ?Sized>(
    graph: &DelaunayGraph,
    model: &M,
    state: &LevelSetState,
    schedule: &TimeSchedule,
) -> Result<LevelSetState> {
    check_state(graph, state)?;
    let dt = schedule.dt;
    let mut x = state.c.clone();
    let mut change = f64::INFINITY;
    for _ in 0..schedule.picard_max.max(1) {
        let coeffs = model.coefficients(graph, &x);
        let a = assemble_a(graph, &coeffs, schedule.mass)?;
        let (k, h) = assemble_k_h(graph, &coeffs)?;
        let lhs = a.add_scaled(dt, &k);
        let ac = a.mul_vec(&state.c);
        let rhs: Vec<f64> = ac.iter().zip(&h).map(|(ac, h)| ac + dt * h).collect();
        let y = solve_sparse(&lhs, &rhs, &schedule.solver)?;
        let scale = x.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
        change = y.iter().zip(&x).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        x = y;
        if change <= schedule.picard_tol * scale {
            return Ok(LevelSetState {
                c: x,
                r: state.r,
                t: state.t + dt,
            });
        }
    }
    Err(Error::PicardNonConvergence {
        iterations: schedule.picard_max,
        change,
    })
}

/// A stored trajectory state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub c: Vec<f64>,
}

/// Result of an evolution run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOutcome {
    pub state: LevelSetState,
    pub steps: usize,
    /// True when the sign pattern stayed fixed for the convergence window
    /// (or the narrow band emptied).
    pub converged: bool,
    pub snapshots: Vec<Snapshot>,
    /// Number of times the implicit step had to halve its time step.
    pub halvings: usize,
    /// Mean number of active points per step (narrow-band runs only).
    pub mean_active: Option<f64>,
}

/// An evolution aborted by an error, with everything computed so far.
#[derive(Debug)]
pub struct EvolveFailure {
    pub error: Error,
    pub partial: EvolveOutcome,
}

impl fmt::Display for EvolveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "evolution failed after {} steps: {}", self.partial.steps, self.error)
    }
}

impl std::error::Error for EvolveFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<EvolveFailure> for Error {
    fn from(f: EvolveFailure) -> Self {
        f.error
    }
}

/// Maximum number of step-size halvings for one implicit step.
const MAX_HALVINGS: usize = 10;

/// Evolves from `c0` until the inside/outside pattern is stable for
/// `schedule.window` steps or `schedule.max_steps` is reached.
pub fn evolve<M: CoefficientField + ?Sized>(
    graph: &DelaunayGraph,
    model: &mut M,
    c0: &[f64],
    schedule: &TimeSchedule,
    stepper: Stepper,
) -> std::result::Result<EvolveOutcome, EvolveFailure> {
    let mut out = EvolveOutcome {
        state: LevelSetState::new(c0.to_vec()),
        steps: 0,
        converged: false,
        snapshots: Vec::new(),
        halvings: 0,
        mean_active: None,
    };
    let fail = |error: Error, out: EvolveOutcome| EvolveFailure { error, partial: out };
    if let Err(e) = schedule.validate().and_then(|_| check_state(graph, &out.state)) {
        return Err(fail(e, out));
    }
    if let Err(e) = model.prepare(graph, c0, out.state.r) {
        return Err(fail(e, out));
    }
    if schedule.snapshot_every > 0 {
        out.snapshots.push(snapshot(0, &out.state));
    }
    let mut sched = *schedule;
    let mut stable = 0;
    while out.steps < schedule.max_steps {
        let next = match stepper {
            Stepper::Explicit => explicit_euler_step(graph, model, &out.state, &sched),
            Stepper::Implicit => loop {
                match implicit_euler_step(graph, model, &out.state, &sched) {
                    Err(Error::PicardNonConvergence { .. }) if out.halvings < MAX_HALVINGS => {
                        sched.dt *= 0.5;
                        out.halvings += 1;
                    }
                    other => break other,
                }
            },
        };
        let next = match next {
            Ok(s) => s,
            Err(e) => return Err(fail(e, out)),
        };
        let same = out.state.c.iter().zip(&next.c).all(|(a, b)| (*a <= 0.0) == (*b <= 0.0));
        out.state = next;
        out.steps += 1;
        if let Err(e) = model.refresh(&out.state.c) {
            return Err(fail(e, out));
        }
        if schedule.snapshot_every > 0 && out.steps.is_multiple_of(schedule.snapshot_every) {
            out.snapshots.push(snapshot(out.steps, &out.state));
        }
        stable = if same { stable + 1 } else { 0 };
        if schedule.is_stable(stable, sched.dt) {
            out.converged = true;
            break;
        }
    }
    Ok(out)
}

pub(crate) fn snapshot(step: usize, state: &LevelSetState) -> Snapshot {
    Snapshot {
        step,
        t: state.t,
        c: state.c.clone(),
    }
}

fn check_state(graph: &DelaunayGraph, state: &LevelSetState) -> Result<()> {
    if state.c.len() != graph.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_vertices(),
            found: state.c.len(),
        });
    }
    Ok(())
}
