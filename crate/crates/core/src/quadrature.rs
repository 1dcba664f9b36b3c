//! Grid quadrature over the parameter box.
//!
//! The Bayes mixture `Q(·) = ∫ q(θ) p(· | θ) dθ` is realised on a tensor
//! grid: every node carries `log q(θ) + log w + log p(data | θ)`, which is
//! normalised with a max-shifted log-sum-exp. The unnormalised sum is the
//! log-evidence `log Q(data)`.
//!
//! Posteriors concentrate at width `O(1/√(n+m))`, so a coarse pass over the
//! whole box is followed by [`refine`] passes on `mean ± 10 sd`.

use serde::{Deserialize, Serialize};

use crate::model::{gaussian_cond_raw, ConditionalLaw, DataSummary, Dataset, ModelKind, ModelSpec, Theta};
use crate::numeric::{log_sum_exp, normal_pdf};
use crate::{Error, Result};

pub const MIN_RESOLUTION: usize = 8;
/// Refinement passes only run when `n + m` exceeds this.
pub const REFINE_THRESHOLD: usize = 50;
/// Half-width of a refined box, in posterior standard deviations.
pub const REFINE_HALF_WIDTH: f64 = 10.0;
/// Relative inward offset of trapezoid end nodes, keeping them strictly inside the box.
const ENDPOINT_NUDGE: f64 = 1e-9;
/// Continuous predictive components below `max - PRUNE_LOG_WEIGHT` (log scale) are dropped.
const PRUNE_LOG_WEIGHT: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    Trapezoid,
    GaussLegendre,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Nodes per dimension; a single value is broadcast to every dimension.
    pub resolution: Vec<usize>,
    #[serde(default = "default_rule")]
    pub rule: QuadratureRule,
    #[serde(default = "default_refine_passes")]
    pub refine_passes: usize,
}

fn default_rule() -> QuadratureRule {
    QuadratureRule::Trapezoid
}

fn default_refine_passes() -> usize {
    1
}

impl GridConfig {
    pub fn default_for(kind: ModelKind) -> Self {
        let resolution = match kind {
            ModelKind::Mixture => vec![512],
            ModelKind::Gaussian => vec![128, 128],
        };
        GridConfig { resolution, rule: QuadratureRule::Trapezoid, refine_passes: 1 }
    }

    pub fn resolution_for(&self, dim: usize) -> Result<Vec<usize>> {
        match self.resolution.len() {
            1 => Ok(vec![self.resolution[0]; dim]),
            l if l == dim => Ok(self.resolution.clone()),
            l => Err(Error::InvalidConfig(format!("grid.resolution has {l} entries for a {dim}-d model"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Tensor-product quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rule: QuadratureRule,
    bounds: Vec<(f64, f64)>,
    axes: Vec<Axis>,
    /// Row-major flattened node coordinates, `dim` values per node.
    points: Vec<f64>,
    log_weights: Vec<f64>,
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn build_axis(lo: f64, hi: f64, resolution: usize, rule: QuadratureRule) -> Axis {
    let width = hi - lo;
    match rule {
        QuadratureRule::Trapezoid => {
            let h = width / (resolution - 1) as f64;
            let mut nodes: Vec<f64> = (0..resolution).map(|i| lo + h * i as f64).collect();
            nodes[0] = lo + ENDPOINT_NUDGE * width;
            nodes[resolution - 1] = hi - ENDPOINT_NUDGE * width;
            let mut weights = vec![h; resolution];
            weights[0] = 0.5 * h;
            weights[resolution - 1] = 0.5 * h;
            Axis { nodes, weights }
        }
        QuadratureRule::GaussLegendre => {
            let (z, w) = gauss_legendre(resolution);
            let half = 0.5 * width;
            let mid = lo + half;
            Axis { nodes: z.iter().map(|t| mid + half * t).collect(), weights: w.iter().map(|v| half * v).collect() }
        }
    }
}

/// Builds a tensor grid on the box `bounds`.
pub fn build_grid(bounds: &[(f64, f64)], resolution: &[usize], rule: QuadratureRule) -> Result<Grid> {
    if bounds.len() != resolution.len() || bounds.is_empty() || bounds.len() > 2 {
        return Err(Error::InvalidConfig(format!(
            "grid needs 1 or 2 dimensions with one resolution each, got {} bounds / {} resolutions",
            bounds.len(),
            resolution.len()
        )));
    }
    if let Some(&r) = resolution.iter().find(|&&r| r < MIN_RESOLUTION) {
        return Err(Error::InvalidConfig(format!("grid resolution {r} below minimum {MIN_RESOLUTION}")));
    }
    if let Some(&(lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo < hi)) {
        return Err(Error::Domain(format!("empty grid interval ({lo}, {hi})")));
    }
    let axes: Vec<Axis> = bounds.iter().zip(resolution).map(|(&(lo, hi), &r)| build_axis(lo, hi, r, rule)).collect();
    let mut points = Vec::new();
    let mut log_weights = Vec::new();
    match axes.as_slice() {
        [a] => {
            points.extend_from_slice(&a.nodes);
            log_weights.extend(a.weights.iter().map(|w| w.ln()));
        }
        [a, b] => {
            for (&x, &wx) in a.nodes.iter().zip(&a.weights) {
                for (&y, &wy) in b.nodes.iter().zip(&b.weights) {
                    points.push(x);
                    points.push(y);
                    log_weights.push(wx.ln() + wy.ln());
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(Grid { rule, bounds: bounds.to_vec(), axes, points, log_weights })
}

impl Grid {
    pub fn for_model(model: &ModelSpec, config: &GridConfig) -> Result<Grid> {
        let res = config.resolution_for(model.dim())?;
        build_grid(model.domain().bounds(), &res, config.rule)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn resolution(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.nodes.len()).collect()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim())
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `Σ w_i f(θ_i)`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points().zip(&self.log_weights).map(|(p, lw)| lw.exp() * f(p)).sum()
    }
}

/// A log-density tabulated on the nodes of a tensor grid, interpolated
/// (piecewise linear in each axis) between them.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPrior {
    axes: Vec<Vec<f64>>,
    log_density: Vec<f64>,
}

impl TabulatedPrior {
    fn eval(&self, theta: &[f64]) -> f64 {
        let locate = |axis: &[f64], v: f64| -> Option<(usize, f64)> {
            let (first, last) = (axis[0], axis[axis.len() - 1]);
            if v < first || v > last {
                return None;
            }
            let j = axis.partition_point(|&a| a <= v).clamp(1, axis.len() - 1);
            let t = (v - axis[j - 1]) / (axis[j] - axis[j - 1]);
            Some((j - 1, t))
        };
        match self.axes.as_slice() {
            [a] => match locate(a, theta[0]) {
                Some((j, t)) => (1.0 - t) * self.log_density[j] + t * self.log_density[j + 1],
                None => f64::NEG_INFINITY,
            },
            [a, b] => match (locate(a, theta[0]), locate(b, theta[1])) {
                (Some((i, s)), Some((j, t))) => {
                    let nb = b.len();
                    let at = |i: usize, j: usize| self.log_density[i * nb + j];
                    (1.0 - s) * ((1.0 - t) * at(i, j) + t * at(i, j + 1))
                        + s * ((1.0 - t) * at(i + 1, j) + t * at(i + 1, j + 1))
                }
                _ => f64::NEG_INFINITY,
            },
            _ => unreachable!(),
        }
    }
}

/// The prior `q(θ)` over `Λ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Uniform,
    Tabulated(TabulatedPrior),
    PointMass(Theta),
}

impl Prior {
    /// Tabulates `log_density` (up to a constant) on `grid`, normalised so that
    /// the grid integrates it to one.
    pub fn tabulated(grid: &Grid, log_density: impl Fn(&[f64]) -> f64) -> Result<Prior> {
        let raw: Vec<f64> = grid.points().map(&log_density).collect();
        let terms: Vec<f64> = raw.iter().zip(grid.log_weights()).map(|(l, w)| l + w).collect();
        let log_mass = log_sum_exp(&terms);
        if !log_mass.is_finite() {
            return Err(Error::InvalidConfig("tabulated prior has no finite mass on the grid".into()));
        }
        Ok(Prior::Tabulated(TabulatedPrior {
            axes: grid.axes().iter().map(|a| a.nodes.clone()).collect(),
            log_density: raw.iter().map(|l| l - log_mass).collect(),
        }))
    }

    /// Gaussian bump with per-dimension `center` and `scale`, truncated to the grid box.
    pub fn truncated_gaussian(grid: &Grid, center: &[f64], scale: &[f64]) -> Result<Prior> {
        Prior::tabulated(grid, |t| {
            t.iter().zip(center).zip(scale).map(|((v, c), s)| -0.5 * ((v - c) / s).powi(2)).sum()
        })
    }

    /// `log q(θ)` for `θ` in `model`'s box.
    pub fn log_density(&self, model: &ModelSpec, theta: &[f64]) -> f64 {
        match self {
            Prior::Uniform => {
                if model.domain().bounds().iter().zip(theta).all(|(&(lo, hi), &v)| lo <= v && v <= hi) {
                    -model.domain().volume().ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::Tabulated(t) => t.eval(theta),
            Prior::PointMass(_) => f64::NEG_INFINITY,
        }
    }
}

/// Normalised posterior weights on a grid.
#[derive(Debug, Clone)]
pub struct Posterior {
    grid: Option<Grid>,
    /// Flattened node coordinates (a single node for a point-mass prior).
    points: Vec<f64>,
    dim: usize,
    log_weights: Vec<f64>,
    log_evidence: f64,
}

impl Posterior {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// The grid this posterior lives on; `None` for a point-mass prior.
    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for (p, lw) in self.points().zip(&self.log_weights) {
            let w = lw.exp();
            for k in 0..self.dim {
                mean[k] += w * p[k];
            }
        }
        mean
    }

    pub fn std_dev(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut var = vec![0.0; self.dim];
        for (p, lw) in self.points().zip(&self.log_weights) {
            let w = lw.exp();
            for k in 0..self.dim {
                var[k] += w * (p[k] - mean[k]).powi(2);
            }
        }
        var.into_iter().map(f64::sqrt).collect()
    }
}

/// `log p(Z^n, X̃^m | θ)`, evaluated point by point with support checks.
pub fn log_likelihood(model: &ModelSpec, theta: &Theta, data: &Dataset) -> Result<f64> {
    let mut ll = 0.0;
    for p in &data.labeled {
        ll += model.log_joint(theta, p)?;
    }
    for &x in &data.unlabeled {
        ll += model.log_marginal_x(theta, x)?;
    }
    Ok(ll)
}

fn from_terms(grid: Option<Grid>, points: Vec<f64>, dim: usize, mut terms: Vec<f64>) -> Result<Posterior> {
    if terms.iter().any(|t| t.is_nan()) {
        return Err(Error::DegeneratePosterior("NaN node log-weight".into()));
    }
    let log_evidence = log_sum_exp(&terms);
    if !log_evidence.is_finite() {
        return Err(Error::DegeneratePosterior("every node has zero likelihood".into()));
    }
    for t in terms.iter_mut() {
        *t -= log_evidence;
    }
    Ok(Posterior { grid, points, dim, log_weights: terms, log_evidence })
}

/// Posterior on `grid` from a precomputed data summary.
pub fn posterior_from_summary(
    model: &ModelSpec,
    grid: &Grid,
    prior: &Prior,
    summary: &DataSummary,
) -> Result<Posterior> {
    if let Prior::PointMass(theta) = prior {
        return point_mass_posterior(theta, summary);
    }
    let lls = summary.log_likelihood_many(&grid.points, grid.dim());
    let terms: Vec<f64> = grid
        .points()
        .zip(grid.log_weights())
        .zip(lls)
        .map(|((p, lw), ll)| {
            let lq = prior.log_density(model, p);
            if lq == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                lq + lw + ll
            }
        })
        .collect();
    from_terms(Some(grid.clone()), grid.points.clone(), grid.dim(), terms)
}

fn point_mass_posterior(theta: &Theta, summary: &DataSummary) -> Result<Posterior> {
    let ll = summary.log_likelihood(theta.values());
    from_terms(None, theta.values().to_vec(), theta.dim(), vec![ll])
}

pub fn posterior(model: &ModelSpec, grid: &Grid, prior: &Prior, data: &Dataset) -> Result<Posterior> {
    let summary = model.summarize(data)?;
    posterior_from_summary(model, grid, prior, &summary)
}

/// Re-grids on `mean ± 10 sd` (clipped to `Λ`), `passes` times.
///
/// The prior density is the unrestricted one, so the refined evidence is the
/// integral over the sub-box directly; that equals the evidence under the
/// prior renormalised to the sub-box times its prior mass.
pub fn refine(
    model: &ModelSpec,
    posterior: &Posterior,
    prior: &Prior,
    data: &Dataset,
    passes: usize,
) -> Result<Posterior> {
    let summary = model.summarize(data)?;
    refine_with_summary(model, posterior, prior, &summary, passes)
}

pub fn refine_with_summary(
    model: &ModelSpec,
    posterior: &Posterior,
    prior: &Prior,
    summary: &DataSummary,
    passes: usize,
) -> Result<Posterior> {
    if passes == 0 {
        return Err(Error::InvalidConfig("refine needs at least one pass".into()));
    }
    let mut current = posterior.clone();
    for _ in 0..passes {
        let Some(grid) = current.grid() else {
            return Ok(current);
        };
        let mean = current.mean();
        let sd = current.std_dev();
        let mut bounds = Vec::with_capacity(mean.len());
        for (k, &(lo, hi)) in model.domain().bounds().iter().enumerate() {
            let a = (mean[k] - REFINE_HALF_WIDTH * sd[k]).max(lo);
            let b = (mean[k] + REFINE_HALF_WIDTH * sd[k]).min(hi);
            if !(a < b) || !sd[k].is_finite() {
                return Err(Error::DegeneratePosterior(format!("cannot refine: sd {:?}", sd)));
            }
            bounds.push((a, b));
        }
        let next = build_grid(&bounds, &grid.resolution(), grid.rule())?;
        current = posterior_from_summary(model, &next, prior, summary)?;
    }
    Ok(current)
}

/// Builds the grid for `config`, computes the posterior and refines it when
/// `n + m` exceeds [`REFINE_THRESHOLD`].
pub fn fit_posterior(model: &ModelSpec, config: &GridConfig, prior: &Prior, data: &Dataset) -> Result<Posterior> {
    let summary = model.summarize(data)?;
    fit_posterior_summary(model, config, prior, &summary, data.n() + data.m())
}

pub(crate) fn fit_posterior_summary(
    model: &ModelSpec,
    config: &GridConfig,
    prior: &Prior,
    summary: &DataSummary,
    sample_size: usize,
) -> Result<Posterior> {
    let grid = Grid::for_model(model, config)?;
    let post = posterior_from_summary(model, &grid, prior, summary)?;
    if sample_size > REFINE_THRESHOLD && config.refine_passes > 0 {
        refine_with_summary(model, &post, prior, summary, config.refine_passes)
    } else {
        Ok(post)
    }
}

/// Finite Gaussian mixture in one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
}

impl GaussianMixture {
    pub fn single(mean: f64, var: f64) -> Self {
        GaussianMixture { weights: vec![1.0], means: vec![mean], vars: vec![var] }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.weights.iter().zip(&self.means).zip(&self.vars).map(|((w, m), v)| w * normal_pdf(y, *m, *v)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    /// Densities at many points; components sharing a variance share the
    /// normalising constant.
    pub fn pdf_many(&self, ys: &[f64]) -> Vec<f64> {
        let norm: Vec<f64> =
            self.vars.iter().zip(&self.weights).map(|(v, w)| w / (2.0 * std::f64::consts::PI * v).sqrt()).collect();
        let inv: Vec<f64> = self.vars.iter().map(|v| -0.5 / v).collect();
        ys.iter()
            .map(|&y| {
                self.means
                    .iter()
                    .zip(&norm)
                    .zip(&inv)
                    .map(|((m, c), k)| {
                        let d = y - m;
                        c * (k * d * d).exp()
                    })
                    .sum()
            })
            .collect()
    }
}

/// Posterior predictive law of `Y'` given the data and `X' = x'`.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveDist {
    Finite { labels: Vec<f64>, probs: Vec<f64> },
    Continuous(GaussianMixture),
}

impl PredictiveDist {
    /// Probability (finite) or density (continuous) of `y`.
    pub fn prob(&self, y: f64) -> f64 {
        match self {
            PredictiveDist::Finite { labels, probs } => labels.iter().position(|&l| l == y).map_or(0.0, |i| probs[i]),
            PredictiveDist::Continuous(g) => g.pdf(y),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            PredictiveDist::Finite { labels, probs } => labels.iter().zip(probs).map(|(l, p)| l * p).sum(),
            PredictiveDist::Continuous(g) => g.mean(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            PredictiveDist::Finite { probs, .. } => probs.iter().sum(),
            PredictiveDist::Continuous(g) => g.weights.iter().sum(),
        }
    }
}

impl From<ConditionalLaw> for PredictiveDist {
    fn from(law: ConditionalLaw) -> Self {
        match law {
            ConditionalLaw::Finite { labels, probs } => PredictiveDist::Finite { labels, probs },
            ConditionalLaw::Gaussian { mean, var } => PredictiveDist::Continuous(GaussianMixture::single(mean, var)),
        }
    }
}

/// `Q(y' | data, x') = Σ_i w_i p_{θ_i}(y' | x')` with `w_i ∝ posterior_i · p_{θ_i}(x')`.
///
/// The extra `p_θ(x')` factor matters: the test feature is itself evidence
/// about `θ`.
pub fn predictive(model: &ModelSpec, posterior: &Posterior, x_prime: f64) -> Result<PredictiveDist> {
    let probe = Theta::new(posterior.points().next().expect("non-empty posterior").to_vec());
    model.log_marginal_x(&probe, x_prime)?;
    let mut lw: Vec<f64> = posterior
        .points()
        .zip(posterior.log_weights())
        .map(|(p, w)| w + model.log_marginal_x_raw(p, x_prime))
        .collect();
    let norm = log_sum_exp(&lw);
    if !norm.is_finite() {
        return Err(Error::Conditioning { x: x_prime });
    }
    for v in lw.iter_mut() {
        *v -= norm;
    }
    Ok(match model.kind() {
        ModelKind::Mixture => {
            let (mut q1, mut q2) = (0.0, 0.0);
            for (p, w) in posterior.points().zip(&lw) {
                let w = w.exp();
                let t = p[0];
                let a = t * x_prime;
                let b = (1.0 - t) * (1.0 - x_prime);
                let s = a + b;
                if s > 0.0 {
                    q1 += w * a / s;
                    q2 += w * b / s;
                }
            }
            let total = q1 + q2;
            PredictiveDist::Finite {
                labels: crate::model::MIXTURE_LABELS.to_vec(),
                probs: vec![q1 / total, q2 / total],
            }
        }
        ModelKind::Gaussian => {
            let cutoff = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max) - PRUNE_LOG_WEIGHT;
            let mut mix = GaussianMixture { weights: Vec::new(), means: Vec::new(), vars: Vec::new() };
            for (p, &w) in posterior.points().zip(&lw) {
                if w < cutoff {
                    continue;
                }
                let (m, v) = gaussian_cond_raw(p, x_prime);
                mix.weights.push(w.exp());
                mix.means.push(m);
                mix.vars.push(v);
            }
            let total: f64 = mix.weights.iter().sum();
            mix.weights.iter_mut().for_each(|w| *w /= total);
            PredictiveDist::Continuous(mix)
        }
    })
}
