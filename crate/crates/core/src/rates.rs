//! Leading constants of the excess-risk bounds in the three regimes:
//!
//! - supervised (`m = 0`): `K2 = (d - Tr(I_XY⁻¹ I_X)) / β`, risk `K2 / 2n`;
//! - linear (`m = αn`): `K1 = Tr((I_XY + αI_X)⁻¹ (I_XY - I_X)) / β`, risk `K1 / 2n`;
//! - superlinear (`m = n^{1+γ}`): `K3 = (Tr(I_X⁻¹ I_XY) - d) / β`, risk `K3 / 2n^{1+γ}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fisher::FisherPair;
use crate::numeric::round_half_up;
use crate::{Error, Result};

/// Relation between unlabeled and labeled sample counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegimeSpec {
    Sl,
    SslLinear { alpha: f64 },
    SslSuper { gamma: f64 },
}

impl RegimeSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegimeSpec::SslLinear { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::InvalidConfig(format!("alpha must be > 0, got {alpha}")))
            }
            RegimeSpec::SslSuper { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::InvalidConfig(format!("gamma must be > 0, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    /// Unlabeled count for `n` labeled points, rounded half up.
    pub fn unlabeled_count(&self, n: usize) -> usize {
        match *self {
            RegimeSpec::Sl => 0,
            RegimeSpec::SslLinear { alpha } => round_half_up(alpha * n as f64),
            RegimeSpec::SslSuper { gamma } => round_half_up((n as f64).powf(1.0 + gamma)),
        }
    }

    /// Exponent `e` in the predicted `risk ∝ n^e`.
    pub fn slope_target(&self) -> f64 {
        match *self {
            RegimeSpec::Sl | RegimeSpec::SslLinear { .. } => -1.0,
            RegimeSpec::SslSuper { gamma } => -(1.0 + gamma),
        }
    }

    /// Short identifier used in CSV files: `sl`, `ssl_linear(1)`, `ssl_super(0.5)`.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for RegimeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeSpec::Sl => write!(f, "sl"),
            RegimeSpec::SslLinear { alpha } => write!(f, "ssl_linear({alpha})"),
            RegimeSpec::SslSuper { gamma } => write!(f, "ssl_super({gamma})"),
        }
    }
}

impl FromStr for RegimeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse regime {s:?}"));
        let arg = |prefix: &str| -> Result<f64> {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(bad)?
                .parse::<f64>()
                .map_err(|_| bad())
        };
        let r = if s == "sl" {
            RegimeSpec::Sl
        } else if s.starts_with("ssl_linear") {
            RegimeSpec::SslLinear { alpha: arg("ssl_linear")? }
        } else if s.starts_with("ssl_super") {
            RegimeSpec::SslSuper { gamma: arg("ssl_super")? }
        } else {
            return Err(bad());
        };
        r.validate()?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub beta: f64,
}

impl RateConstants {
    /// All three constants; `alpha` only enters `k1`.
    pub fn compute(pair: &FisherPair, alpha: f64, beta: f64) -> Result<Self> {
        Ok(RateConstants { k1: k1(pair, alpha, beta)?, k2: k2(pair, beta)?, k3: k3(pair, beta)?, beta })
    }

    pub fn for_regime(&self, regime: &RegimeSpec) -> f64 {
        match regime {
            RegimeSpec::Sl => self.k2,
            RegimeSpec::SslLinear { .. } => self.k1,
            RegimeSpec::SslSuper { .. } => self.k3,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("beta must be > 0, got {beta}")))
    }
}

/// The `1/β` factor multiplies both trace terms. Evaluated as
/// `(d - (1 + α) Tr((I_XY + αI_X)⁻¹ I_X)) / β`, which is the same operation
/// sequence as [`k2`] when `α = 0`, so `k1(p, 0, β) == k2(p, β)` exactly.
pub fn k1(pair: &FisherPair, alpha: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let inv = pair.i_xy.add(&pair.i_x.scale(alpha)).inverse()?;
    Ok((pair.dim() as f64 - (1.0 + alpha) * inv.mul(&pair.i_x).trace()) / beta)
}

pub fn k2(pair: &FisherPair, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let inv = pair.i_xy.inverse()?;
    Ok((pair.dim() as f64 - inv.mul(&pair.i_x).trace()) / beta)
}

pub fn k3(pair: &FisherPair, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let inv = pair.i_x.inverse()?;
    Ok((inv.mul(&pair.i_xy).trace() - pair.dim() as f64) / beta)
}

/// Leading-order risk: `K/(2n)` or `K3/(2n^{1+γ})`.
pub fn leading_risk(regime: &RegimeSpec, n: usize, constants: &RateConstants) -> f64 {
    let n = n as f64;
    match *regime {
        RegimeSpec::Sl => constants.k2 / (2.0 * n),
        RegimeSpec::SslLinear { .. } => constants.k1 / (2.0 * n),
        RegimeSpec::SslSuper { gamma } => constants.k3 / (2.0 * n.powf(1.0 + gamma)),
    }
}
