//! Parametric families.
//!
//! Two families are built in:
//!
//! - **Mixture**: `p(x, y | θ) = (θ·2x)^{[y=1]} ((1-θ)·2(1-x))^{[y=2]}` on
//!   `x ∈ [0, 1]`, `y ∈ {1, 2}`, with scalar mixing weight `θ`.
//! - **Gaussian**: `X = Y + Z` with `Y ~ N(0, σ²)` and `Z ~ N(μ, 1)`
//!   independent, parameterised by `θ = (μ, σ)`.
//!
//! Densities raise [`Error::Support`] for points outside the support instead of
//! returning `-inf`, so bad data cannot silently poison a quadrature sum. A
//! log-density of `-inf` is only returned where the density is genuinely zero
//! on the boundary of the support (e.g. `x = 0, y = 1` in the mixture).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numeric::{normal_log_pdf, LN_2PI};
use crate::{Error, Result};

/// The box `Λ` of admissible parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDomain {
    bounds: Vec<(f64, f64)>,
}

impl ParamDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Domain("domain needs at least one dimension".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Domain(format!("dimension {i}: need lower < upper, got ({lo}, {hi})")));
            }
        }
        Ok(ParamDomain { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Lebesgue volume `|Λ|`.
    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn contains_strict(&self, values: &[f64]) -> bool {
        values.len() == self.dim() && values.iter().zip(&self.bounds).all(|(&v, &(lo, hi))| lo < v && v < hi)
    }

    /// A [`Theta`] checked to lie strictly inside the box.
    pub fn theta(&self, values: Vec<f64>) -> Result<Theta> {
        if !self.contains_strict(&values) {
            return Err(Error::ParamOutOfRange {
                theta: values,
                reason: format!("not strictly inside {:?}", self.bounds),
            });
        }
        Ok(Theta(values))
    }
}

/// A parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn new(values: Vec<f64>) -> Self {
        Theta(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LabelAlphabet {
    /// Ordered, duplicate-free label values.
    Finite(Vec<f64>),
    Continuous,
}

impl LabelAlphabet {
    pub fn finite(labels: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Domain("finite alphabet must be non-empty".into()));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::Domain(format!("duplicate label {a}")));
            }
        }
        Ok(LabelAlphabet::Finite(labels))
    }

    pub fn labels(&self) -> Option<&[f64]> {
        match self {
            LabelAlphabet::Finite(l) => Some(l),
            LabelAlphabet::Continuous => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: f64,
    pub y: f64,
}

impl LabeledPoint {
    pub fn new(x: f64, y: f64) -> Self {
        LabeledPoint { x, y }
    }
}

/// `n` labeled pairs plus `m` unlabeled features.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub labeled: Vec<LabeledPoint>,
    pub unlabeled: Vec<f64>,
}

impl Dataset {
    pub fn new(labeled: Vec<LabeledPoint>, unlabeled: Vec<f64>) -> Self {
        Dataset { labeled, unlabeled }
    }

    pub fn n(&self) -> usize {
        self.labeled.len()
    }

    pub fn m(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn merged(&self, other: &Dataset) -> Dataset {
        let mut out = self.clone();
        out.labeled.extend_from_slice(&other.labeled);
        out.unlabeled.extend_from_slice(&other.unlabeled);
        out
    }
}

/// Law of `Y` given `X = x`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionalLaw {
    Finite { labels: Vec<f64>, probs: Vec<f64> },
    Gaussian { mean: f64, var: f64 },
}

/// What a score is taken of: a labeled pair (joint density) or a bare
/// feature (marginal density of `X`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Pair(LabeledPoint),
    Feature(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mixture,
    Gaussian,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Mixture => "mixture",
            ModelKind::Gaussian => "gaussian",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixture" => Ok(ModelKind::Mixture),
            "gaussian" => Ok(ModelKind::Gaussian),
            other => Err(Error::InvalidConfig(format!("unknown model {other:?}"))),
        }
    }
}

pub const MIXTURE_LABELS: [f64; 2] = [1.0, 2.0];
pub const DEFAULT_MIXTURE_BOUNDS: (f64, f64) = (0.02, 0.98);
pub const DEFAULT_MU_BOUNDS: (f64, f64) = (-5.0, 5.0);
pub const DEFAULT_SIGMA_BOUNDS: (f64, f64) = (0.2, 5.0);

/// A built-in family together with its parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    kind: ModelKind,
    domain: ParamDomain,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, domain: ParamDomain) -> Result<Self> {
        match kind {
            ModelKind::Mixture => {
                let ok = domain.dim() == 1 && domain.bounds()[0].0 >= 0.0 && domain.bounds()[0].1 <= 1.0;
                if !ok {
                    return Err(Error::Domain(format!(
                        "mixture needs a 1-d box inside [0, 1], got {:?}",
                        domain.bounds()
                    )));
                }
            }
            ModelKind::Gaussian => {
                if domain.dim() != 2 || domain.bounds()[1].0 <= 0.0 {
                    return Err(Error::Domain(format!(
                        "gaussian needs a 2-d box (mu, sigma) with sigma bounded away from 0, got {:?}",
                        domain.bounds()
                    )));
                }
            }
        }
        Ok(ModelSpec { kind, domain })
    }

    pub fn mixture() -> Self {
        let domain = ParamDomain::new(vec![DEFAULT_MIXTURE_BOUNDS]).expect("static bounds");
        ModelSpec { kind: ModelKind::Mixture, domain }
    }

    pub fn gaussian() -> Self {
        let domain = ParamDomain::new(vec![DEFAULT_MU_BOUNDS, DEFAULT_SIGMA_BOUNDS]).expect("static bounds");
        ModelSpec { kind: ModelKind::Gaussian, domain }
    }

    pub fn with_default_domain(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Mixture => Self::mixture(),
            ModelKind::Gaussian => Self::gaussian(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn domain(&self) -> &ParamDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn alphabet(&self) -> LabelAlphabet {
        match self.kind {
            ModelKind::Mixture => LabelAlphabet::Finite(MIXTURE_LABELS.to_vec()),
            ModelKind::Gaussian => LabelAlphabet::Continuous,
        }
    }

    pub fn is_finite_alphabet(&self) -> bool {
        self.kind == ModelKind::Mixture
    }

    /// Parameter strictly inside this model's box.
    pub fn theta(&self, values: Vec<f64>) -> Result<Theta> {
        self.domain.theta(values)
    }

    /// Checks that `theta` is a valid parameter of the family (not of the box:
    /// density evaluation is allowed on the closure of `Λ`).
    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        let bad = |reason: &str| Err(Error::ParamOutOfRange { theta: theta.to_vec(), reason: reason.to_string() });
        if theta.len() != self.dim() {
            return bad("wrong dimension");
        }
        match self.kind {
            ModelKind::Mixture if !(0.0..=1.0).contains(&theta[0]) => bad("mixing weight must be in [0, 1]"),
            ModelKind::Gaussian if !theta[0].is_finite() => bad("mu must be finite"),
            ModelKind::Gaussian if !(theta[1] > 0.0 && theta[1].is_finite()) => bad("sigma must be positive"),
            _ => Ok(()),
        }
    }

    fn check_x(&self, x: f64) -> Result<()> {
        match self.kind {
            ModelKind::Mixture if !(0.0..=1.0).contains(&x) => {
                Err(Error::Support(format!("mixture feature {x} outside [0, 1]")))
            }
            ModelKind::Gaussian if !x.is_finite() => Err(Error::Support(format!("non-finite feature {x}"))),
            _ => Ok(()),
        }
    }

    fn check_point(&self, p: &LabeledPoint) -> Result<()> {
        self.check_x(p.x)?;
        match self.kind {
            ModelKind::Mixture if !MIXTURE_LABELS.contains(&p.y) => {
                Err(Error::Support(format!("mixture label {} not in {{1, 2}}", p.y)))
            }
            ModelKind::Gaussian if !p.y.is_finite() => Err(Error::Support(format!("non-finite label {}", p.y))),
            _ => Ok(()),
        }
    }

    /// Checks every point of a dataset against the support.
    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        data.labeled.iter().try_for_each(|p| self.check_point(p))?;
        data.unlabeled.iter().try_for_each(|&x| self.check_x(x))
    }

    /// `log p_θ(x, y)`.
    pub fn log_joint(&self, theta: &Theta, point: &LabeledPoint) -> Result<f64> {
        self.check_theta(&theta.0)?;
        self.check_point(point)?;
        Ok(self.log_joint_raw(&theta.0, point))
    }

    /// `log p_θ(x) = log Σ_y p_θ(x, y)`.
    pub fn log_marginal_x(&self, theta: &Theta, x: f64) -> Result<f64> {
        self.check_theta(&theta.0)?;
        self.check_x(x)?;
        Ok(self.log_marginal_x_raw(&theta.0, x))
    }

    pub fn cond_y_given_x(&self, theta: &Theta, x: f64) -> Result<ConditionalLaw> {
        self.check_theta(&theta.0)?;
        self.check_x(x)?;
        if self.log_marginal_x_raw(&theta.0, x) == f64::NEG_INFINITY {
            return Err(Error::Conditioning { x });
        }
        Ok(match self.kind {
            ModelKind::Mixture => {
                let p1 = self.mixture_p1_raw(theta.0[0], x);
                ConditionalLaw::Finite { labels: MIXTURE_LABELS.to_vec(), probs: vec![p1, 1.0 - p1] }
            }
            ModelKind::Gaussian => {
                let (mean, var) = gaussian_cond_raw(&theta.0, x);
                ConditionalLaw::Gaussian { mean, var }
            }
        })
    }

    pub(crate) fn log_joint_raw(&self, theta: &[f64], p: &LabeledPoint) -> f64 {
        match self.kind {
            ModelKind::Mixture => {
                let t = theta[0];
                if p.y == 1.0 {
                    (t * 2.0 * p.x).ln()
                } else {
                    ((1.0 - t) * 2.0 * (1.0 - p.x)).ln()
                }
            }
            ModelKind::Gaussian => {
                let (mu, sigma) = (theta[0], theta[1]);
                normal_log_pdf(p.y, 0.0, sigma * sigma) + normal_log_pdf(p.x - p.y, mu, 1.0)
            }
        }
    }

    pub(crate) fn log_marginal_x_raw(&self, theta: &[f64], x: f64) -> f64 {
        match self.kind {
            ModelKind::Mixture => {
                let t = theta[0];
                (t * 2.0 * x + (1.0 - t) * 2.0 * (1.0 - x)).ln()
            }
            ModelKind::Gaussian => {
                let (mu, sigma) = (theta[0], theta[1]);
                normal_log_pdf(x, mu, sigma * sigma + 1.0)
            }
        }
    }

    /// `p_θ(y = 1 | x)` for the mixture.
    pub(crate) fn mixture_p1_raw(&self, t: f64, x: f64) -> f64 {
        let a = t * x;
        let b = (1.0 - t) * (1.0 - x);
        a / (a + b)
    }

    pub fn sample_pair<R: Rng + ?Sized>(&self, theta: &Theta, rng: &mut R) -> LabeledPoint {
        self.sample_pair_raw(&theta.0, rng)
    }

    pub fn sample_x<R: Rng + ?Sized>(&self, theta: &Theta, rng: &mut R) -> f64 {
        self.sample_pair_raw(&theta.0, rng).x
    }

    pub(crate) fn sample_pair_raw<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> LabeledPoint {
        match self.kind {
            ModelKind::Mixture => {
                let label_one = rng.random::<f64>() < theta[0];
                // 1 - U lies in (0, 1], which keeps x off the zero-density end.
                let r = (1.0 - rng.random::<f64>()).sqrt();
                if label_one {
                    LabeledPoint::new(r, 1.0)
                } else {
                    LabeledPoint::new(1.0 - r, 2.0)
                }
            }
            ModelKind::Gaussian => {
                let y: f64 = theta[1] * rng.sample::<f64, _>(StandardNormal);
                let z: f64 = theta[0] + rng.sample::<f64, _>(StandardNormal);
                LabeledPoint::new(y + z, y)
            }
        }
    }

    /// Draws `n` labeled pairs and `m` unlabeled features.
    pub fn sample_dataset<R: Rng + ?Sized>(&self, theta: &Theta, n: usize, m: usize, rng: &mut R) -> Dataset {
        let labeled = (0..n).map(|_| self.sample_pair_raw(&theta.0, rng)).collect();
        let unlabeled = (0..m).map(|_| self.sample_pair_raw(&theta.0, rng).x).collect();
        Dataset { labeled, unlabeled }
    }

    /// Analytic gradient in `θ` of the joint (for a pair) or marginal (for a
    /// bare feature) log-density.
    pub fn score(&self, theta: &Theta, obs: Observation) -> Result<Vec<f64>> {
        self.check_theta(&theta.0)?;
        let logp = self.log_density_checked(&theta.0, obs)?;
        if logp == f64::NEG_INFINITY {
            return Err(Error::Support(format!("zero density at {obs:?}")));
        }
        Ok(self.score_raw(&theta.0, obs))
    }

    /// Central finite-difference score with step `h`, used to cross-check [`score`](Self::score).
    pub fn score_fd(&self, theta: &Theta, obs: Observation, h: f64) -> Result<Vec<f64>> {
        self.check_theta(&theta.0)?;
        let mut grad = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let mut up = theta.0.clone();
            let mut dn = theta.0.clone();
            up[k] += h;
            dn[k] -= h;
            self.check_theta(&up)?;
            self.check_theta(&dn)?;
            let fu = self.log_density_checked(&up, obs)?;
            let fd = self.log_density_checked(&dn, obs)?;
            grad.push((fu - fd) / (2.0 * h));
        }
        Ok(grad)
    }

    fn log_density_checked(&self, theta: &[f64], obs: Observation) -> Result<f64> {
        match obs {
            Observation::Pair(p) => {
                self.check_point(&p)?;
                Ok(self.log_joint_raw(theta, &p))
            }
            Observation::Feature(x) => {
                self.check_x(x)?;
                Ok(self.log_marginal_x_raw(theta, x))
            }
        }
    }

    pub(crate) fn score_raw(&self, theta: &[f64], obs: Observation) -> Vec<f64> {
        match (self.kind, obs) {
            (ModelKind::Mixture, Observation::Pair(p)) => {
                let t = theta[0];
                vec![if p.y == 1.0 { 1.0 / t } else { -1.0 / (1.0 - t) }]
            }
            (ModelKind::Mixture, Observation::Feature(x)) => {
                let t = theta[0];
                vec![(4.0 * x - 2.0) / (t * 2.0 * x + (1.0 - t) * 2.0 * (1.0 - x))]
            }
            (ModelKind::Gaussian, Observation::Pair(p)) => {
                let (mu, sigma) = (theta[0], theta[1]);
                let s2 = sigma * sigma;
                vec![p.x - p.y - mu, -1.0 / sigma + p.y * p.y / (s2 * sigma)]
            }
            (ModelKind::Gaussian, Observation::Feature(x)) => {
                let (mu, sigma) = (theta[0], theta[1]);
                let v = sigma * sigma + 1.0;
                let d = x - mu;
                vec![d / v, sigma * (d * d / (v * v) - 1.0 / v)]
            }
        }
    }

    /// Sufficient statistics (or per-point terms where none exist) for
    /// evaluating the dataset likelihood at many parameter values.
    pub fn summarize(&self, data: &Dataset) -> Result<DataSummary> {
        self.check_dataset(data)?;
        Ok(match self.kind {
            ModelKind::Mixture => {
                let mut s = MixtureSummary::default();
                for p in &data.labeled {
                    if p.y == 1.0 {
                        s.n1 += 1.0;
                        s.constant += (2.0 * p.x).ln();
                    } else {
                        s.n2 += 1.0;
                        s.constant += (2.0 * (1.0 - p.x)).ln();
                    }
                }
                s.unlabeled = data.unlabeled.iter().map(|&x| (2.0 * (1.0 - x), 4.0 * x - 2.0)).collect();
                DataSummary::Mixture(s)
            }
            ModelKind::Gaussian => {
                let (n_lab, r_mean, r_ss) = centered(data.labeled.iter().map(|p| p.x - p.y));
                let (m_unl, x_mean, x_ss) = centered(data.unlabeled.iter().copied());
                let y_sq = data.labeled.iter().map(|p| p.y * p.y).sum();
                DataSummary::Gaussian(GaussianSummary { n: n_lab, y_sq, r_mean, r_ss, m: m_unl, x_mean, x_ss })
            }
        })
    }
}

fn centered(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, f64) {
    let n = values.clone().count() as f64;
    if n == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n;
    let ss = values.map(|v| (v - mean) * (v - mean)).sum();
    (n, mean, ss)
}

/// Mean and variance of `Y | X = x` in the Gaussian model.
pub(crate) fn gaussian_cond_raw(theta: &[f64], x: f64) -> (f64, f64) {
    let (mu, sigma) = (theta[0], theta[1]);
    let s2 = sigma * sigma;
    (s2 * (x - mu) / (s2 + 1.0), s2 / (s2 + 1.0))
}

#[derive(Debug, Clone, Default)]
pub struct MixtureSummary {
    n1: f64,
    n2: f64,
    constant: f64,
    /// `(a, b)` with `p_θ(x) = a + θ b` for each unlabeled feature.
    unlabeled: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct GaussianSummary {
    n: f64,
    y_sq: f64,
    r_mean: f64,
    r_ss: f64,
    m: f64,
    x_mean: f64,
    x_ss: f64,
}

#[derive(Debug, Clone)]
pub enum DataSummary {
    Mixture(MixtureSummary),
    Gaussian(GaussianSummary),
}

/// Unlabeled mixture factors are multiplied in blocks before taking one log.
/// Each factor lies in `[2 min(θ, 1-θ), 2 max(θ, 1-θ)]`, so a block of 16
/// cannot overflow and only underflows for `θ` within ~1e-18 of the ends.
const PRODUCT_BLOCK: usize = 16;

impl DataSummary {
    /// `log p(Z^n, X̃^m | θ)`.
    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        match self {
            DataSummary::Mixture(s) => {
                let t = theta[0];
                let mut ll = s.labeled_log_likelihood(t);
                for block in s.unlabeled.chunks(PRODUCT_BLOCK) {
                    let prod: f64 = block.iter().map(|&(a, b)| a + t * b).product();
                    ll += prod.ln();
                }
                ll
            }
            DataSummary::Gaussian(s) => {
                let (mu, sigma) = (theta[0], theta[1]);
                let s2 = sigma * sigma;
                let mut ll = 0.0;
                if s.n > 0.0 {
                    let dr = s.r_mean - mu;
                    ll += -s.n * LN_2PI - s.n * sigma.ln() - s.y_sq / (2.0 * s2) - 0.5 * (s.r_ss + s.n * dr * dr);
                }
                if s.m > 0.0 {
                    let v = s2 + 1.0;
                    let dx = s.x_mean - mu;
                    ll += -0.5 * s.m * (LN_2PI + v.ln()) - (s.x_ss + s.m * dx * dx) / (2.0 * v);
                }
                ll
            }
        }
    }
}

impl MixtureSummary {
    fn labeled_log_likelihood(&self, t: f64) -> f64 {
        let mut ll = self.constant;
        if self.n1 > 0.0 {
            ll += self.n1 * t.ln();
        }
        if self.n2 > 0.0 {
            ll += self.n2 * (1.0 - t).ln();
        }
        ll
    }
}

impl DataSummary {
    /// [`DataSummary::log_likelihood`] at every row of a flattened `dim`-column
    /// array; bit-identical to the pointwise version.
    pub fn log_likelihood_many(&self, points: &[f64], dim: usize) -> Vec<f64> {
        match self {
            DataSummary::Mixture(s) => {
                // Nodes innermost so the block products vectorise.
                let mut ll: Vec<f64> = points.iter().map(|&t| s.labeled_log_likelihood(t)).collect();
                let mut prod = vec![1.0; points.len()];
                for block in s.unlabeled.chunks(PRODUCT_BLOCK) {
                    prod.fill(1.0);
                    for &(a, b) in block {
                        for (p, &t) in prod.iter_mut().zip(points) {
                            *p *= a + t * b;
                        }
                    }
                    for (l, p) in ll.iter_mut().zip(&prod) {
                        *l += p.ln();
                    }
                }
                ll
            }
            DataSummary::Gaussian(_) => points.chunks(dim).map(|p| self.log_likelihood(p)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn th(v: &[f64]) -> Theta {
        Theta::new(v.to_vec())
    }

    #[test]
    fn log_joint_examples() {
        let mix = ModelSpec::mixture();
        let v = mix.log_joint(&th(&[0.5]), &LabeledPoint::new(0.25, 2.0)).unwrap();
        assert!((v - 0.75f64.ln()).abs() < 1e-15);
        assert!((v - (-0.28768)).abs() < 1e-5);
        let v = mix.log_joint(&th(&[0.5]), &LabeledPoint::new(0.5, 1.0)).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-15);

        let g = ModelSpec::gaussian();
        let v = g.log_joint(&th(&[0.0, 1.0]), &LabeledPoint::new(0.0, 0.0)).unwrap();
        assert!((v + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn log_marginal_examples() {
        let mix = ModelSpec::mixture();
        for x in [0.0, 0.1, 0.5, 0.77, 1.0] {
            assert!(mix.log_marginal_x(&th(&[0.5]), x).unwrap().abs() < 1e-15);
        }
        assert_eq!(mix.log_marginal_x(&th(&[1.0]), 0.5).unwrap(), 0.0);
        let g = ModelSpec::gaussian();
        let v = g.log_marginal_x(&th(&[0.0, 1.0]), 0.0).unwrap();
        assert!((v + 0.5 * (4.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn support_violations_are_errors() {
        let mix = ModelSpec::mixture();
        assert!(matches!(mix.log_joint(&th(&[0.5]), &LabeledPoint::new(1.5, 1.0)), Err(Error::Support(_))));
        assert!(matches!(mix.log_joint(&th(&[0.5]), &LabeledPoint::new(0.5, 3.0)), Err(Error::Support(_))));
        assert!(matches!(mix.log_marginal_x(&th(&[0.5]), -0.1), Err(Error::Support(_))));
        assert!(matches!(mix.log_marginal_x(&th(&[1.5]), 0.1), Err(Error::ParamOutOfRange { .. })));
        let g = ModelSpec::gaussian();
        assert!(g.log_marginal_x(&th(&[0.0, 1.0]), f64::NAN).is_err());
        assert!(g.log_marginal_x(&th(&[0.0, -1.0]), 0.0).is_err());
        // Genuine zero density on the support boundary.
        assert_eq!(mix.log_joint(&th(&[0.5]), &LabeledPoint::new(0.0, 1.0)).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn conditional_examples() {
        let mix = ModelSpec::mixture();
        match mix.cond_y_given_x(&th(&[0.5]), 0.5).unwrap() {
            ConditionalLaw::Finite { probs, .. } => assert_eq!(probs, vec![0.5, 0.5]),
            _ => unreachable!(),
        }
        match mix.cond_y_given_x(&th(&[0.5]), 0.75).unwrap() {
            ConditionalLaw::Finite { probs, .. } => assert!((probs[0] - 0.75).abs() < 1e-15),
            _ => unreachable!(),
        }
        match ModelSpec::gaussian().cond_y_given_x(&th(&[0.0, 1.0]), 2.0).unwrap() {
            ConditionalLaw::Gaussian { mean, var } => {
                assert!((mean - 1.0).abs() < 1e-15);
                assert!((var - 0.5).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        // At theta = 1 only the first component remains, and its density is zero at x = 0.
        assert!(matches!(mix.cond_y_given_x(&th(&[1.0]), 0.0), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn score_examples() {
        let mix = ModelSpec::mixture();
        for x in [0.1, 0.6] {
            let s = mix.score(&th(&[0.5]), Observation::Pair(LabeledPoint::new(x, 1.0))).unwrap();
            assert!((s[0] - 2.0).abs() < 1e-15);
        }
        let s = mix.score(&th(&[0.5]), Observation::Feature(1.0)).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-15);
        let s = mix.score(&th(&[0.5]), Observation::Feature(0.5)).unwrap();
        assert_eq!(s[0], 0.0);
        assert!(mix.score(&th(&[0.5]), Observation::Pair(LabeledPoint::new(0.0, 1.0))).is_err());
    }

    #[test]
    fn batched_likelihood_is_bit_identical() {
        for (model, theta, pts) in [
            (ModelSpec::mixture(), th(&[0.3]), vec![0.02, 0.3, 0.5, 0.97]),
            (ModelSpec::gaussian(), th(&[0.5, 1.5]), vec![0.0, 1.0, -2.0, 0.3, 4.0, 4.5]),
        ] {
            let data = model.sample_dataset(&theta, 37, 101, &mut stream(5, 0, Purpose::Sampling));
            let s = model.summarize(&data).unwrap();
            let d = model.dim();
            let many = s.log_likelihood_many(&pts, d);
            for (p, v) in pts.chunks(d).zip(many) {
                assert_eq!(v.to_bits(), s.log_likelihood(p).to_bits());
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let g = ModelSpec::gaussian();
        let a = g.sample_pair(&th(&[1.0, 1.0]), &mut stream(9, 4, Purpose::Sampling));
        let b = g.sample_pair(&th(&[1.0, 1.0]), &mut stream(9, 4, Purpose::Sampling));
        assert_eq!(a, b);
    }

    #[test]
    fn mixture_label_frequency() {
        let mix = ModelSpec::mixture();
        let mut rng = stream(1, 0, Purpose::Sampling);
        let n = 100_000;
        let ones = (0..n).filter(|_| mix.sample_pair(&th(&[0.7]), &mut rng).y == 1.0).count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.7).abs() < 3.0 * (0.21f64 / n as f64).sqrt(), "freq {freq}");
    }

    #[test]
    fn gaussian_feature_mean() {
        let g = ModelSpec::gaussian();
        let mut rng = stream(2, 0, Purpose::Sampling);
        let n = 100_000;
        let mean = (0..n).map(|_| g.sample_x(&th(&[1.0, 1.0]), &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3.0 * (2.0f64 / n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn summary_matches_pointwise_sum() {
        for model in [ModelSpec::mixture(), ModelSpec::gaussian()] {
            let theta0 = match model.kind() {
                ModelKind::Mixture => th(&[0.4]),
                ModelKind::Gaussian => th(&[0.3, 1.3]),
            };
            let data = model.sample_dataset(&theta0, 37, 53, &mut stream(3, 0, Purpose::Sampling));
            let summary = model.summarize(&data).unwrap();
            for probe in [theta0.clone(), th(&theta0.0.iter().map(|v| v * 0.9).collect::<Vec<_>>())] {
                let direct: f64 = data.labeled.iter().map(|p| model.log_joint(&probe, p).unwrap()).sum::<f64>()
                    + data.unlabeled.iter().map(|&x| model.log_marginal_x(&probe, x).unwrap()).sum::<f64>();
                let fast = summary.log_likelihood(&probe.0);
                assert!((direct - fast).abs() < 1e-10 * direct.abs().max(1.0), "{direct} vs {fast}");
            }
        }
    }

    #[test]
    fn model_domain_validation() {
        assert!(ModelSpec::new(ModelKind::Mixture, ParamDomain::new(vec![(0.1, 1.2)]).unwrap()).is_err());
        assert!(ModelSpec::new(ModelKind::Gaussian, ParamDomain::new(vec![(-1.0, 1.0), (0.0, 2.0)]).unwrap()).is_err());
        assert!(ParamDomain::new(vec![(1.0, 1.0)]).is_err());
        assert!(LabelAlphabet::finite(vec![1.0, 1.0]).is_err());
        assert!(LabelAlphabet::finite(vec![]).is_err());
        assert!(ModelSpec::mixture().theta(vec![0.02]).is_err());
        assert!(ModelSpec::mixture().theta(vec![0.5]).is_ok());
    }
}
