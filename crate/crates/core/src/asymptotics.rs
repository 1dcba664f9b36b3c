//! Large-sample information quantities.
//!
//! The KL divergence between the sampling law of `(Z^n, X̃^m)` under `θ` and
//! the Bayes mixture `Q` behaves like
//!
//! ```text
//! (d/2) log(1/(2πe)) + log(1/q(θ)) + (1/2) log |n I_XY(θ) + m I_X(θ)|
//! ```
//!
//! [`laplace_kl`] evaluates this expression and [`mc_kl`] estimates the
//! divergence directly from quadrature evidences.

use rayon::prelude::*;
use serde::Serialize;

use crate::fisher::FisherPair;
use crate::loss::{LossKind, LossSpec};
use crate::model::{ModelSpec, Theta};
use crate::numeric::mean_and_se;
use crate::quadrature::{fit_posterior_summary, predictive, Grid, GridConfig, Prior};
use crate::rates::{leading_risk, RateConstants, RegimeSpec};
use crate::risk::{excess_risk, excess_risk_kl_form, kl_truth_predictive, McConfig, RiskEstimate, RiskSetup, MIN_REPS};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceValue {
    /// Nats.
    pub value: f64,
    pub n: usize,
    pub m: usize,
    pub q_at_theta0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub reps: usize,
}

/// `(1/2) log |n I_XY + m I_X|`.
fn half_log_det(pair: &FisherPair, n: f64, m: f64) -> Result<f64> {
    let mat = pair.i_xy.scale(n).add(&pair.i_x.scale(m));
    let ev = mat.sym_eigenvalues();
    if ev[0] <= 0.0 {
        return Err(Error::Singular { det: mat.det() });
    }
    Ok(0.5 * mat.det().ln())
}

pub fn laplace_kl(pair: &FisherPair, n: usize, m: usize, q_at_theta0: f64) -> Result<LaplaceValue> {
    if !(q_at_theta0 > 0.0 && q_at_theta0.is_finite()) {
        return Err(Error::InvalidConfig(format!("prior density at theta0 must be positive, got {q_at_theta0}")));
    }
    let d = pair.dim() as f64;
    let e = std::f64::consts::E;
    let value =
        -0.5 * d * (2.0 * std::f64::consts::PI * e).ln() - q_at_theta0.ln() + half_log_det(pair, n as f64, m as f64)?;
    Ok(LaplaceValue { value, n, m, q_at_theta0 })
}

/// Monte Carlo `E[log p(data | θ0) - log Q(data)]` with `data ~ p_θ0`.
pub fn mc_kl(setup: &RiskSetup, n: usize, m: usize, mc: &McConfig) -> Result<McEstimate> {
    if mc.reps < 2 {
        return Err(Error::InvalidConfig("mc_kl needs at least 2 replications".into()));
    }
    let values = (0..mc.reps)
        .into_par_iter()
        .map(|r| {
            if n + m == 0 {
                return Ok(0.0);
            }
            let mut rng = stream(mc.seed, r as u64, Purpose::Replication);
            let data = setup.model.sample_dataset(&setup.theta0, n, m, &mut rng);
            let summary = setup.model.summarize(&data)?;
            let post = fit_posterior_summary(&setup.model, &setup.grid, &setup.prior, &summary, n + m)?;
            Ok(summary.log_likelihood(setup.theta0.values()) - post.log_evidence())
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, se) = mean_and_se(&values);
    Ok(McEstimate { mean, se, reps: mc.reps })
}

/// Leading-order conditional mutual information gap, i.e. `β · leading_risk`.
pub fn mi_gap_leading(regime: &RegimeSpec, n: usize, pair: &FisherPair) -> Result<f64> {
    let alpha = match regime {
        RegimeSpec::SslLinear { alpha } => *alpha,
        _ => 0.0,
    };
    let c = RateConstants::compute(pair, alpha, 1.0)?;
    Ok(leading_risk(regime, n, &c))
}

/// The mutual information gap as a difference of two closed-form KL values:
/// `(1/2) log|(n+1) I_XY + m I_X| - (1/2) log|n I_XY + (m+1) I_X|`.
pub fn mi_gap_laplace(regime: &RegimeSpec, n: usize, pair: &FisherPair) -> Result<f64> {
    let m = regime.unlabeled_count(n) as f64;
    let n = n as f64;
    Ok(half_log_det(pair, n + 1.0, m)? - half_log_det(pair, n, m + 1.0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub risk_estimate: RiskEstimate,
    /// Mutual information estimate (mean, standard error), nats.
    pub mi_estimate: (f64, f64),
    pub beta: f64,
    /// `risk ≤ MI/β + 3·combined SE`.
    pub bound_holds: bool,
    /// `MI/β - risk`.
    pub slack: f64,
    pub combined_se: f64,
    /// Log loss only: `|risk - MI| ≤ 3·combined SE`.
    pub equality_holds: Option<bool>,
}

/// Compares the excess risk against `I(Θ = θ0; Y' | data, X') / β`.
pub fn verify_risk_bound(
    setup: &RiskSetup,
    regime: RegimeSpec,
    n: usize,
    spec: &LossSpec,
    mc: &McConfig,
) -> Result<BoundReport> {
    let beta = match spec.kind {
        LossKind::SelfInformation | LossKind::Square { .. } => spec.beta().expect("exp-concave loss"),
        LossKind::ZeroOne => return Err(Error::Unsupported("risk bound check needs a known beta".into())),
    };
    let risk = excess_risk(setup, regime, n, spec, mc)?;
    let mi = excess_risk_kl_form(setup, regime, n, mc)?;
    let combined_se = risk.std_error.hypot(mi.std_error / beta);
    let slack = mi.mean / beta - risk.mean;
    let bound_holds = risk.mean <= mi.mean / beta + 3.0 * combined_se;
    let equality_holds =
        (spec.kind == LossKind::SelfInformation).then(|| (risk.mean - mi.mean).abs() <= 3.0 * combined_se);
    Ok(BoundReport {
        risk_estimate: risk,
        mi_estimate: (mi.mean, mi.std_error),
        beta,
        bound_holds,
        slack,
        combined_se,
        equality_holds,
    })
}

/// Draws `θ ~ q`. Tabulated priors are sampled on the nodes of `grid`.
struct PriorSampler {
    nodes: Vec<Vec<f64>>,
    cdf: Vec<f64>,
}

impl PriorSampler {
    fn new(model: &ModelSpec, prior: &Prior, grid: &GridConfig) -> Result<Option<Self>> {
        match prior {
            Prior::Tabulated(_) => {
                let g = Grid::for_model(model, grid)?;
                let mut acc = 0.0;
                let mut cdf = Vec::with_capacity(g.len());
                for (p, lw) in g.points().zip(g.log_weights()) {
                    acc += (prior.log_density(model, p) + lw).exp();
                    cdf.push(acc);
                }
                if !(acc > 0.0) {
                    return Err(Error::InvalidConfig("degenerate prior".into()));
                }
                cdf.iter_mut().for_each(|c| *c /= acc);
                Ok(Some(PriorSampler { nodes: g.points().map(<[f64]>::to_vec).collect(), cdf }))
            }
            _ => Ok(None),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c < u).min(self.nodes.len() - 1);
        self.nodes[i].clone()
    }
}

/// `I_q(Y'; Θ | Z^n, X')`: the expected KL between the true label law and the
/// `q`-mixture predictive, with `θ` itself drawn from `q`.
pub fn redundancy_objective(
    model: &ModelSpec,
    prior: &Prior,
    grid: &GridConfig,
    n: usize,
    mc: &McConfig,
) -> Result<McEstimate> {
    if !model.is_finite_alphabet() {
        return Err(Error::Unsupported("redundancy objective needs a finite label alphabet".into()));
    }
    if mc.reps < MIN_REPS {
        return Err(Error::InvalidConfig(format!("need at least {MIN_REPS} replications")));
    }
    let sampler = PriorSampler::new(model, prior, grid)?;
    let values = (0..mc.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(mc.seed, r as u64, Purpose::Redundancy);
            let theta = match (prior, &sampler) {
                (Prior::PointMass(t), _) => t.clone(),
                (_, Some(s)) => Theta::new(s.draw(&mut rng)),
                (_, None) => Theta::new(
                    model.domain().bounds().iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect(),
                ),
            };
            let data = model.sample_dataset(&theta, n, 0, &mut rng);
            let x_prime = model.sample_x(&theta, &mut rng);
            let summary = model.summarize(&data)?;
            let post = fit_posterior_summary(model, grid, prior, &summary, n)?;
            let pred = predictive(model, &post, x_prime)?;
            let truth = model.cond_y_given_x(&theta, x_prime)?;
            kl_truth_predictive(&truth, &pred)
                .ok_or_else(|| Error::DegeneratePosterior("predictive assigns zero probability".into()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, se) = mean_and_se(&values);
    Ok(McEstimate { mean, se, reps: mc.reps })
}

/// A finite family of priors over which the redundancy objective is maximised:
/// uniform, five truncated Gaussian bumps and five point masses.
pub fn candidate_priors(model: &ModelSpec, grid: &GridConfig) -> Result<Vec<(String, Prior)>> {
    let g = Grid::for_model(model, grid)?;
    let bounds = model.domain().bounds();
    let mut out = vec![("uniform".to_string(), Prior::Uniform)];
    let fractions = [0.1, 0.3, 0.5, 0.7, 0.9];
    for f in fractions {
        let center: Vec<f64> = bounds.iter().map(|(lo, hi)| lo + f * (hi - lo)).collect();
        let scale: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.1 * (hi - lo)).collect();
        out.push((format!("bump({f})"), Prior::truncated_gaussian(&g, &center, &scale)?));
    }
    for f in fractions {
        let center: Vec<f64> = bounds.iter().map(|(lo, hi)| lo + f * (hi - lo)).collect();
        out.push((format!("point({f})"), Prior::PointMass(Theta::new(center))));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedundancyEntry {
    pub prior: String,
    pub mean: f64,
    pub se: f64,
}

/// Evaluates the objective for every prior; returns the entries and the index
/// of the largest. No claim is made that it is the global maximiser.
pub fn max_redundancy(
    model: &ModelSpec,
    priors: &[(String, Prior)],
    grid: &GridConfig,
    n: usize,
    mc: &McConfig,
) -> Result<(Vec<RedundancyEntry>, usize)> {
    let mut entries = Vec::with_capacity(priors.len());
    for (name, prior) in priors {
        let e = redundancy_objective(model, prior, grid, n, mc)?;
        entries.push(RedundancyEntry { prior: name.clone(), mean: e.mean, se: e.se });
    }
    let best = (0..entries.len())
        .max_by(|&a, &b| entries[a].mean.total_cmp(&entries[b].mean))
        .ok_or_else(|| Error::InvalidConfig("empty prior set".into()))?;
    Ok((entries, best))
}
