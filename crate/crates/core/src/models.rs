//! Contour models: per-triangle `F`, `G`, `H` coefficients of
//! `F(u) u_t = div(G(u) grad u) + H(u)` and the image features they read.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::TriangleCoefficients;
use crate::graph::DelaunayGraph;

/// Image (or graph) features sampled at the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureField {
    channels: usize,
    /// Vertex-major values, `channels` per vertex.
    values: Vec<f64>,
    /// Triangle-major gradients, `channels` per triangle.
    gradients: Vec<[f64; 2]>,
}

impl FeatureField {
    /// Features with `channels` values per vertex, stored vertex-major.
    pub fn new(graph: &DelaunayGraph, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParameter("feature field needs at least one channel".into()));
        }
        if values.len() != channels * graph.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: channels * graph.num_vertices(),
                found: values.len(),
            });
        }
        let mut gradients = vec![[0.0; 2]; channels * graph.num_triangles()];
        for ch in 0..channels {
            let plane: Vec<f64> = values.iter().skip(ch).step_by(channels).copied().collect();
            for (t, g) in triangle_gradient(graph, &plane)?.into_iter().enumerate() {
                gradients[t * channels + ch] = g;
            }
        }
        Ok(FeatureField {
            channels,
            values,
            gradients,
        })
    }

    pub fn gray(graph: &DelaunayGraph, values: Vec<f64>) -> Result<Self> {
        FeatureField::new(graph, 1, values)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_vertices(&self) -> usize {
        self.values.len() / self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Feature vector of vertex `v`.
    pub fn at(&self, v: usize) -> &[f64] {
        &self.values[v * self.channels..(v + 1) * self.channels]
    }

    /// Scalar intensity per vertex: the channel mean.
    pub fn intensity(&self) -> Vec<f64> {
        self.values
            .chunks(self.channels)
            .map(|c| c.iter().sum::<f64>() / self.channels as f64)
            .collect()
    }

    /// Gradient of channel `ch` on triangle `t`.
    pub fn gradient(&self, t: usize, ch: usize) -> [f64; 2] {
        self.gradients[t * self.channels + ch]
    }

    /// Euclidean norm of the stacked channel gradients on each triangle.
    pub fn gradient_norms(&self) -> Vec<f64> {
        self.gradients
            .chunks(self.channels)
            .map(|gs| gs.iter().map(|g| g[0] * g[0] + g[1] * g[1]).sum::<f64>().sqrt())
            .collect()
    }

    /// Per-triangle edge-stopping values for sensitivity `lambda`.
    pub fn edge_stopping_field(&self, lambda: f64) -> Vec<f64> {
        self.gradient_norms().into_iter().map(|n| edge_stopping(n, lambda)).collect()
    }
}

/// Gradient of the plane through the nodal values on each triangle.
pub fn triangle_gradient(graph: &DelaunayGraph, values: &[f64]) -> Result<Vec<[f64; 2]>> {
    if values.len() != graph.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_vertices(),
            found: values.len(),
        });
    }
    Ok(graph.triangles().iter().map(|t| t.gradient_of(values)).collect())
}

/// `1 / (1 + lambda |grad I|^2)`.
pub fn edge_stopping(gradnorm: f64, lambda: f64) -> f64 {
    1.0 / (1.0 + lambda * gradnorm * gradnorm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    ErosionDilation,
    Geometric,
    Geodesic,
    Acwe,
    Gar,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erosion" | "erosion-dilation" | "dilation" => Ok(ModelKind::ErosionDilation),
            "geometric" => Ok(ModelKind::Geometric),
            "geodesic" | "gac" => Ok(ModelKind::Geodesic),
            "acwe" | "chan-vese" => Ok(ModelKind::Acwe),
            "gar" => Ok(ModelKind::Gar),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

/// Phase of the region-driven model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Expand,
    Shrink,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Erosion/dilation speed; positive values move the contour inward.
    pub speed: f64,
    /// Edge sensitivity of the stopping function.
    pub lambda: f64,
    /// Balloon magnitude.
    pub beta: f64,
    pub mu: f64,
    pub nu: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Gradient-norm regulariser; `None` selects `1e-4 r / h` at calibration.
    pub eps_grad: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            speed: 1.0,
            lambda: 1.0,
            beta: 1.0,
            mu: 0.1,
            nu: 0.0,
            lambda1: 1.0,
            lambda2: 1.0,
            eps_grad: None,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter(what.to_string()))
            }
        };
        check(self.lambda >= 0.0, "lambda must be non-negative")?;
        check(self.mu >= 0.0, "mu must be non-negative")?;
        check(self.lambda1 >= 0.0 && self.lambda2 >= 0.0, "lambda1 and lambda2 must be non-negative")?;
        check(self.eps_grad.is_none_or(|e| e > 0.0), "eps_grad must be positive")?;
        check(
            [self.speed, self.beta, self.nu].iter().all(|v| v.is_finite()),
            "speed, beta and nu must be finite",
        )
    }
}

/// Inside/outside intensity means used by the region-based model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMeans {
    pub inside: f64,
    pub outside: f64,
    /// Set when one region was empty and fell back to the global mean.
    pub degenerate: bool,
}

/// A contour model bound to its features.
#[derive(Debug, Clone)]
pub struct ContourModel {
    pub kind: ModelKind,
    pub params: ModelParams,
    /// Per-triangle edge stopping; empty means identically one.
    edge_stop: Vec<f64>,
    /// Per-vertex intensity for the region model.
    intensity: Vec<f64>,
    /// Per-vertex stopping field `P` of the region-driven model.
    prior: Vec<f64>,
    direction: Direction,
    means: RegionMeans,
    /// Running (sum, count) of intensity inside and outside.
    sums: [(f64, usize); 2],
    auto_eps: f64,
    /// Mean edge length; the region model's curvature weight is per edge.
    length_scale: f64,
}

impl ContourModel {
    fn base(kind: ModelKind, params: ModelParams) -> Self {
        ContourModel {
            kind,
            params,
            edge_stop: Vec::new(),
            intensity: Vec::new(),
            prior: Vec::new(),
            direction: Direction::Expand,
            means: RegionMeans {
                inside: 0.0,
                outside: 0.0,
                degenerate: false,
            },
            sums: [(0.0, 0); 2],
            auto_eps: 1e-4,
            length_scale: 1.0,
        }
    }

    /// `F = 1/|grad u|`, `G = 0`, `H = speed`.
    pub fn erosion_dilation(speed: f64) -> Self {
        ContourModel::base(
            ModelKind::ErosionDilation,
            ModelParams {
                speed,
                ..ModelParams::default()
            },
        )
    }

    /// `F = 1/(g |grad u|)`, `G = 1/|grad u|`, `H = 0`.
    pub fn geometric(features: &FeatureField, lambda: f64) -> Self {
        let mut m = ContourModel::base(
            ModelKind::Geometric,
            ModelParams {
                lambda,
                ..ModelParams::default()
            },
        );
        m.edge_stop = features.edge_stopping_field(lambda);
        m
    }

    /// `F = 1/|grad u|`, `G = g/|grad u|`, `H = beta`.
    pub fn geodesic(features: &FeatureField, lambda: f64, beta: f64) -> Self {
        let mut m = ContourModel::base(
            ModelKind::Geodesic,
            ModelParams {
                lambda,
                beta,
                ..ModelParams::default()
            },
        );
        m.edge_stop = features.edge_stopping_field(lambda);
        m
    }

    /// Region model with `F = 1`, `G = mu h/|grad u|` and the two-mean fitting
/// term, where `h` is the mean edge length once calibrated.
    pub fn acwe(features: &FeatureField, mu: f64, nu: f64, lambda1: f64, lambda2: f64) -> Self {
        let mut m = ContourModel::base(
            ModelKind::Acwe,
            ModelParams {
                mu,
                nu,
                lambda1,
                lambda2,
                ..ModelParams::default()
            },
        );
        m.intensity = features.intensity();
        m
    }

    /// Region-driven geodesic model with stopping field `P` derived from the
    /// foreground likelihood: `P = L` when expanding, `1 - L` when shrinking.
    pub fn gar(features: &FeatureField, lambda: f64, beta: f64, likelihood: &[f64], direction: Direction) -> Result<Self> {
        if likelihood.len() != features.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: features.num_vertices(),
                found: likelihood.len(),
            });
        }
        let mut m = ContourModel::base(
            ModelKind::Gar,
            ModelParams {
                lambda,
                beta,
                ..ModelParams::default()
            },
        );
        m.edge_stop = features.edge_stopping_field(lambda);
        m.set_likelihood(likelihood, direction);
        Ok(m)
    }

    /// Builds any model kind from parameters; `features` is required for
    /// every kind except erosion/dilation and `likelihood` for the region-driven one.
    pub fn from_params(
        kind: ModelKind,
        params: ModelParams,
        features: Option<&FeatureField>,
        likelihood: Option<(&[f64], Direction)>,
    ) -> Result<Self> {
        params.validate()?;
        let need = || Error::InvalidParameter(format!("model {kind:?} needs a feature field"));
        let mut m = match kind {
            ModelKind::ErosionDilation => ContourModel::erosion_dilation(params.speed),
            ModelKind::Geometric => ContourModel::geometric(features.ok_or_else(need)?, params.lambda),
            ModelKind::Geodesic => ContourModel::geodesic(features.ok_or_else(need)?, params.lambda, params.beta),
            ModelKind::Acwe => ContourModel::acwe(
                features.ok_or_else(need)?,
                params.mu,
                params.nu,
                params.lambda1,
                params.lambda2,
            ),
            ModelKind::Gar => {
                let (l, dir) = likelihood
                    .ok_or_else(|| Error::InvalidParameter("region-driven model needs a likelihood field".into()))?;
                ContourModel::gar(features.ok_or_else(need)?, params.lambda, params.beta, l, dir)?
            }
        };
        m.params = params;
        Ok(m)
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.params.eps_grad = Some(eps);
        self
    }

    /// Sets the default regulariser `1e-4 r / h` from the saturation bound
    /// and the mean edge length `h`, and measures the region model's
    /// curvature weight `mu` in units of `h`.
    pub fn calibrate(&mut self, graph: &DelaunayGraph, r: f64) {
        let h = graph.mean_edge_length();
        if h > 0.0 {
            self.length_scale = h;
            if r > 0.0 {
                self.auto_eps = 1e-4 * r / h;
            }
        }
    }

    pub fn eps(&self) -> f64 {
        self.params.eps_grad.unwrap_or(self.auto_eps)
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Replaces the likelihood field and phase of the region-driven model.
    pub fn set_likelihood(&mut self, likelihood: &[f64], direction: Direction) {
        self.direction = direction;
        self.prior = match direction {
            Direction::Expand => likelihood.to_vec(),
            Direction::Shrink => likelihood.iter().map(|l| 1.0 - l).collect(),
        };
    }

    /// Stopping field `P` per vertex (empty for other kinds).
    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn needs_region_means(&self) -> bool {
        self.kind == ModelKind::Acwe
    }

    pub fn region_means(&self) -> RegionMeans {
        self.means
    }

    pub fn set_region_means(&mut self, means: RegionMeans) {
        self.means = means;
    }

    /// Recomputes the region means from the sign pattern of `c`.
    pub fn update_region_means(&mut self, c: &[f64]) -> Result<()> {
        if self.needs_region_means() {
            self.means = acwe_region_means(c, &self.intensity)?;
            self.sums = [(0.0, 0); 2];
            for (&ci, &ii) in c.iter().zip(&self.intensity) {
                let side = &mut self.sums[usize::from(ci > 0.0)];
                side.0 += ii;
                side.1 += 1;
            }
        }
        Ok(())
    }

    /// Moves vertex `v` between the inside and outside running sums and
    /// updates the means, in constant time.
    pub fn move_vertex_region(&mut self, v: usize, now_inside: bool) {
        if !self.needs_region_means() {
            return;
        }
        let value = self.intensity[v];
        let (to, from) = if now_inside { (0, 1) } else { (1, 0) };
        self.sums[from].0 -= value;
        self.sums[from].1 -= 1;
        self.sums[to].0 += value;
        self.sums[to].1 += 1;
        let [(si, ni), (so, no)] = self.sums;
        let global = (si + so) / (ni + no) as f64;
        self.means = RegionMeans {
            inside: if ni > 0 { si / ni as f64 } else { global },
            outside: if no > 0 { so / no as f64 } else { global },
            degenerate: ni == 0 || no == 0,
        };
    }

    /// Per-vertex intensity read by the region model.
    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    fn edge_stop(&self, t: usize) -> f64 {
        self.edge_stop.get(t).copied().unwrap_or(1.0)
    }

    /// Frozen coefficients on triangle `t` for coefficient vector `c`.
    pub fn eval_coefficients(&self, graph: &DelaunayGraph, c: &[f64], t: usize) -> TriangleCoefficients {
        let tri = graph.triangle(t);
        let grad = tri.gradient_of(c);
        let eps = self.eps();
        let norm = (grad[0] * grad[0] + grad[1] * grad[1] + eps * eps).sqrt();
        let p = &self.params;
        match self.kind {
            ModelKind::ErosionDilation => TriangleCoefficients {
                f: 1.0 / norm,
                g: 0.0,
                h: p.speed,
            },
            ModelKind::Geometric => TriangleCoefficients {
                f: 1.0 / (self.edge_stop(t) * norm),
                g: 1.0 / norm,
                h: 0.0,
            },
            ModelKind::Geodesic => TriangleCoefficients {
                f: 1.0 / norm,
                g: self.edge_stop(t) / norm,
                h: p.beta,
            },
            ModelKind::Acwe => {
                let u0 = tri.vertices.iter().map(|&v| self.intensity[v]).sum::<f64>() / 3.0;
                let (c1, c2) = (self.means.inside, self.means.outside);
                // Inside is negative, so the fitting term enters with this sign.
                let h = p.nu + p.lambda1 * (u0 - c1).powi(2) - p.lambda2 * (u0 - c2).powi(2);
                TriangleCoefficients {
                    f: 1.0,
                    g: p.mu * self.length_scale / norm,
                    h,
                }
            }
            ModelKind::Gar => {
                let pt = tri.vertices.iter().map(|&v| self.prior[v]).sum::<f64>() / 3.0;
                let balloon = match self.direction {
                    Direction::Expand => p.beta,
                    Direction::Shrink => -p.beta,
                };
                TriangleCoefficients {
                    f: 1.0 / norm,
                    g: pt / norm,
                    h: -balloon * self.edge_stop(t) * pt,
                }
            }
        }
    }

    /// Coefficients on every triangle.
    pub fn eval_all(&self, graph: &DelaunayGraph, c: &[f64]) -> Vec<TriangleCoefficients> {
        (0..graph.num_triangles())
            .into_par_iter()
            .with_min_len(512)
            .map(|t| self.eval_coefficients(graph, c, t))
            .collect()
    }
}

/// Mean intensity over `{c <= 0}` (inside) and `{c > 0}` (outside).
///
/// An empty side takes the global mean and sets the `degenerate` flag.
pub fn acwe_region_means(c: &[f64], intensity: &[f64]) -> Result<RegionMeans> {
    if c.len() != intensity.len() {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            found: intensity.len(),
        });
    }
    if c.is_empty() {
        return Err(Error::DegenerateInput("no vertices".into()));
    }
    let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
    for (&ci, &ii) in c.iter().zip(intensity) {
        if ci <= 0.0 {
            si += ii;
            ni += 1;
        } else {
            so += ii;
            no += 1;
        }
    }
    let global = (si + so) / c.len() as f64;
    Ok(RegionMeans {
        inside: if ni > 0 { si / ni as f64 } else { global },
        outside: if no > 0 { so / no as f64 } else { global },
        degenerate: ni == 0 || no == 0,
    })
}
