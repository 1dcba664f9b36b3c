//! Losses, their exp-concavity parameters and loss-specific Bayes decisions.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{ModelSpec, Theta};
use crate::quadrature::PredictiveDist;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `-log w(y)`.
    SelfInformation,
    /// `[w ≠ y]`.
    ZeroOne,
    /// `(w - y)²` on `[-a, a]`.
    Square { range_bound: f64 },
}

impl FromStr for LossKind {
    type Err = Error;

    /// Config names: `log`, `zero_one`, `square` (range bound 1 unless set separately).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(LossKind::SelfInformation),
            "zero_one" => Ok(LossKind::ZeroOne),
            "square" => Ok(LossKind::Square { range_bound: 1.0 }),
            other => Err(Error::InvalidConfig(format!("unknown loss kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Result<Self> {
        if let LossKind::Square { range_bound } = kind {
            if !(range_bound > 0.0 && range_bound.is_finite()) {
                return Err(Error::InvalidConfig(format!("square loss needs range_bound > 0, got {range_bound}")));
            }
        }
        Ok(LossSpec { kind })
    }

    pub fn log() -> Self {
        LossSpec { kind: LossKind::SelfInformation }
    }

    pub fn zero_one() -> Self {
        LossSpec { kind: LossKind::ZeroOne }
    }

    pub fn square(range_bound: f64) -> Result<Self> {
        Self::new(LossKind::Square { range_bound })
    }

    /// Exp-concavity parameter; `None` for the 0-1 loss, where only existence is known.
    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            LossKind::SelfInformation => Some(1.0),
            LossKind::Square { range_bound } => Some(1.0 / (8.0 * range_bound * range_bound)),
            LossKind::ZeroOne => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LossKind::SelfInformation => "log",
            LossKind::ZeroOne => "zero_one",
            LossKind::Square { .. } => "square",
        }
    }
}

/// An element of the decision space: a predictive law, a label or a real value.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Distribution(PredictiveDist),
    Label(f64),
    Value(f64),
}

fn mismatch(spec: &LossSpec, decision: &Decision) -> Error {
    Error::Unsupported(format!("decision {decision:?} does not match loss {}", spec.name()))
}

/// `ℓ(w, y)`. Log loss with zero assigned probability returns `+inf`; callers
/// aggregating losses count those events.
pub fn loss(spec: &LossSpec, decision: &Decision, y: f64) -> Result<f64> {
    match (spec.kind, decision) {
        (LossKind::SelfInformation, Decision::Distribution(d)) => Ok(-d.prob(y).ln()),
        (LossKind::ZeroOne, Decision::Label(l)) => Ok(if *l == y { 0.0 } else { 1.0 }),
        (LossKind::Square { .. }, Decision::Value(v)) => Ok((v - y) * (v - y)),
        _ => Err(mismatch(spec, decision)),
    }
}

/// Minimiser of the `dist`-expected loss. Ties in the 0-1 case go to the
/// earliest label in alphabet order.
pub fn bayes_decision(spec: &LossSpec, dist: &PredictiveDist) -> Result<Decision> {
    match spec.kind {
        LossKind::SelfInformation => Ok(Decision::Distribution(dist.clone())),
        LossKind::Square { .. } => Ok(Decision::Value(dist.mean())),
        LossKind::ZeroOne => match dist {
            PredictiveDist::Finite { labels, probs } => {
                let mut best = 0;
                for (i, p) in probs.iter().enumerate() {
                    if *p > probs[best] {
                        best = i;
                    }
                }
                Ok(Decision::Label(labels[best]))
            }
            PredictiveDist::Continuous(_) => Err(Error::Unsupported("0-1 loss needs a finite label alphabet".into())),
        },
    }
}

/// Bayes decision under the true conditional `p_θ0(· | x')`.
pub fn oracle_decision(model: &ModelSpec, theta0: &Theta, x_prime: f64, spec: &LossSpec) -> Result<Decision> {
    let law = model.cond_y_given_x(theta0, x_prime)?;
    bayes_decision(spec, &law.into())
}

/// `E_q[exp(-β ℓ(w', Y)) / exp(-β ℓ(w*, Y))]` for a finite `q`.
///
/// For exp-concave losses and `w*` the `q`-Bayes decision this is at most one.
pub fn expconcave_ratio(
    spec: &LossSpec,
    q_labels: &[f64],
    q_probs: &[f64],
    w_star: &Decision,
    w_prime: &Decision,
) -> Result<f64> {
    let beta =
        spec.beta().ok_or_else(|| Error::Unsupported("exp-concavity parameter is unknown for the 0-1 loss".into()))?;
    if q_labels.len() != q_probs.len() {
        return Err(Error::InvalidConfig("label and probability lengths differ".into()));
    }
    let mut total = 0.0;
    for (&y, &q) in q_labels.iter().zip(q_probs) {
        if q == 0.0 {
            continue;
        }
        let diff = loss(spec, w_star, y)? - loss(spec, w_prime, y)?;
        total += q * (beta * diff).exp();
    }
    Ok(total)
}
