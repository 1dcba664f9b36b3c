//! Fisher information of the labeled pair, `I_XY(θ) = E[∇log p(X,Y|θ) ∇log p(X,Y|θ)^T]`,
//! and of the bare feature, `I_X(θ) = E[∇log p(X|θ) ∇log p(X|θ)^T]`.

use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::Mat;
use crate::model::{LabeledPoint, ModelKind, ModelSpec, Observation, Theta};
use crate::numeric::pairwise_sum;
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

pub const MIN_MC_SAMPLES: usize = 1000;
pub const DEFAULT_PD_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-12;
const MC_CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherPair {
    pub i_xy: Mat,
    pub i_x: Mat,
}

impl FisherPair {
    pub fn new(i_xy: Mat, i_x: Mat) -> Result<Self> {
        if i_xy.dim() != i_x.dim() {
            return Err(Error::InvalidConfig("Fisher matrices differ in dimension".into()));
        }
        Ok(FisherPair { i_xy, i_x })
    }

    pub fn scalar(i_xy: f64, i_x: f64) -> Self {
        FisherPair { i_xy: Mat::scalar(i_xy), i_x: Mat::scalar(i_x) }
    }

    pub fn dim(&self) -> usize {
        self.i_xy.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherConditionReport {
    pub i_xy_pd: bool,
    pub i_x_pd: bool,
    /// `I_XY - I_X` positive definite.
    pub strict_order: bool,
    /// Smallest eigenvalues of `I_XY`, `I_X` and `I_XY - I_X`.
    pub min_eigenvalues: [f64; 3],
}

/// `I_X` of the mixture: `∫₀¹ (4x-2)² / (2(1-θ) + 2(2θ-1)x) dx`
/// `= 2 (ln(θ/(1-θ)) - 2t) / t³` with `t = 2θ - 1`.
fn mixture_i_x(theta: f64) -> f64 {
    let t = 2.0 * theta - 1.0;
    if t.abs() < 0.05 {
        // 2 artanh(t) expanded: 4 Σ_k t^{2k} / (2k + 3)
        let t2 = t * t;
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 0..40 {
            sum += term / (2 * k + 3) as f64;
            term *= t2;
            if term < 1e-18 {
                break;
            }
        }
        4.0 * sum
    } else {
        2.0 * ((theta / (1.0 - theta)).ln() - 2.0 * t) / (t * t * t)
    }
}

/// Closed-form Fisher matrices.
///
/// For the Gaussian model in the `(μ, σ)` parameterisation:
/// `I_XY = diag(1, 2/σ²)` and `I_X = diag(1/(σ²+1), 2σ²/(σ²+1)²)`.
pub fn fisher_analytic(model: &ModelSpec, theta: &Theta) -> Result<FisherPair> {
    let v = theta.values();
    if v.len() != model.dim() {
        return Err(Error::ParamOutOfRange { theta: v.to_vec(), reason: "wrong dimension".into() });
    }
    match model.kind() {
        ModelKind::Mixture => {
            let t = v[0];
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::ParamOutOfRange { theta: v.to_vec(), reason: "boundary mixing weight".into() });
            }
            Ok(FisherPair::scalar(1.0 / (t * (1.0 - t)), mixture_i_x(t)))
        }
        ModelKind::Gaussian => {
            let s = v[1];
            if !(s > 0.0 && s.is_finite() && v[0].is_finite()) {
                return Err(Error::ParamOutOfRange { theta: v.to_vec(), reason: "sigma must be positive".into() });
            }
            let s2 = s * s;
            let w = s2 + 1.0;
            Ok(FisherPair { i_xy: Mat::diag2(1.0, 2.0 / s2), i_x: Mat::diag2(1.0 / w, 2.0 * s2 / (w * w)) })
        }
    }
}

/// Alternate Gaussian pair `I_X = diag(1/(σ²+1), 2/(σ²+1))`,
/// `I_XY = diag(1, 2/σ²)`, under which `K2 = 1` and `K3 = σ² + 1/σ²`.
///
/// The `σ` entry of `I_X` matches neither the `σ` nor the `σ²`
/// parameterisation (see [`fisher_analytic`]). The pair exists only to check
/// the rate-constant formulas against those closed forms.
pub fn alternate_gaussian_pair(sigma: f64) -> FisherPair {
    let s2 = sigma * sigma;
    FisherPair { i_xy: Mat::diag2(1.0, 2.0 / s2), i_x: Mat::diag2(1.0 / (s2 + 1.0), 2.0 / (s2 + 1.0)) }
}

/// Monte Carlo Fisher estimate with entry-wise standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherMc {
    pub estimate: FisherPair,
    pub se: FisherPair,
    pub samples: usize,
}

fn outer_into(acc: &mut [f64], g: &[f64]) {
    let d = g.len();
    for i in 0..d {
        for j in 0..d {
            acc[i * d + j] += g[i] * g[j];
        }
    }
}

/// Empirical mean of score outer products over `samples` draws from `p_θ`.
/// Chunks use independent counter-derived streams and are reduced in index
/// order, so the result does not depend on the thread count.
pub fn fisher_mc(model: &ModelSpec, theta: &Theta, samples: usize, seed: u64) -> Result<FisherMc> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidConfig(format!("fisher_mc needs at least {MIN_MC_SAMPLES} samples")));
    }
    fisher_analytic(model, theta)?;
    let d = model.dim();
    let chunks = samples.div_ceil(MC_CHUNK);
    // Per chunk: sums and sums of squares of the d*d entries, for both matrices.
    let partial: Vec<[Vec<f64>; 4]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64, Purpose::FisherJoint);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut out = [vec![0.0; d * d], vec![0.0; d * d], vec![0.0; d * d], vec![0.0; d * d]];
            let mut sq = vec![0.0; d * d];
            for _ in 0..count {
                let p: LabeledPoint = model.sample_pair(theta, &mut rng);
                let gj = model.score_raw(theta.values(), Observation::Pair(p));
                let gx = model.score_raw(theta.values(), Observation::Feature(p.x));
                for (k, g) in [(0usize, &gj), (2, &gx)] {
                    sq.iter_mut().for_each(|v| *v = 0.0);
                    outer_into(&mut sq, g);
                    for e in 0..d * d {
                        out[k][e] += sq[e];
                        out[k + 1][e] += sq[e] * sq[e];
                    }
                }
            }
            out
        })
        .collect();
    let n = samples as f64;
    let reduce = |k: usize, e: usize| pairwise_sum(&partial.iter().map(|p| p[k][e]).collect::<Vec<_>>());
    let mut est = [Mat::zeros(d), Mat::zeros(d)];
    let mut se = [Mat::zeros(d), Mat::zeros(d)];
    for (which, k) in [(0usize, 0usize), (1, 2)] {
        for i in 0..d {
            for j in 0..d {
                let e = i * d + j;
                let mean = reduce(k, e) / n;
                let var = ((reduce(k + 1, e) / n - mean * mean) * n / (n - 1.0)).max(0.0);
                est[which].set(i, j, mean);
                se[which].set(i, j, (var / n).sqrt());
            }
        }
    }
    Ok(FisherMc {
        estimate: FisherPair { i_xy: est[0].symmetrized(), i_x: est[1].symmetrized() },
        se: FisherPair { i_xy: se[0].symmetrized(), i_x: se[1].symmetrized() },
        samples,
    })
}

pub fn check_fisher_conditions(pair: &FisherPair, tol: f64) -> Result<FisherConditionReport> {
    let deviation = pair.i_xy.asymmetry().max(pair.i_x.asymmetry());
    if deviation > SYMMETRY_TOL {
        return Err(Error::Asymmetric { deviation });
    }
    let e_xy = pair.i_xy.min_eigenvalue();
    let e_x = pair.i_x.min_eigenvalue();
    let e_gap = pair.i_xy.sub(&pair.i_x).min_eigenvalue();
    Ok(FisherConditionReport {
        i_xy_pd: e_xy > tol,
        i_x_pd: e_x > tol,
        strict_order: e_gap > tol,
        min_eigenvalues: [e_xy, e_x, e_gap],
    })
}
