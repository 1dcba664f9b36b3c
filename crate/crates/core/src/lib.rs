//! Numerical laboratory for learning rates of Bayes-mixture predictors with
//! labeled and unlabeled data.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: the two built-in parametric families (a two-component density
//!   mixture and an additive Gaussian model), densities, sampling and scores.
//! - [`quadrature`]: grid quadrature over the parameter box, posterior weights,
//!   evidence and posterior-predictive label laws.
//! - [`fisher`]: labeled / unlabeled Fisher information, analytic and Monte Carlo.
//! - [`rates`]: the leading constants `K1`, `K2`, `K3` and leading-order risk.
//! - [`loss`]: losses, Bayes decisions and the exp-concavity ratio.
//! - [`risk`]: Monte Carlo estimation of excess risk.
//! - [`asymptotics`]: closed-form KL expansion, Monte Carlo KL, mutual
//!   information gaps, risk bounds and the redundancy objective.
//! - [`sweep`]: config-driven sweeps over `n`, CSV output and log-log fits.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod fisher;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod numeric;
pub mod quadrature;
pub mod rates;
pub mod risk;
pub mod rng;
pub mod sweep;

pub use error::{Error, Result};
pub use fisher::{FisherConditionReport, FisherPair};
pub use linalg::Mat;
pub use loss::{Decision, LossKind, LossSpec};
pub use model::{Dataset, LabelAlphabet, LabeledPoint, ModelKind, ModelSpec, ParamDomain, Theta};
pub use quadrature::{Grid, GridConfig, Posterior, PredictiveDist, Prior, QuadratureRule};
pub use rates::{RateConstants, RegimeSpec};
pub use risk::{McConfig, RiskEstimate, RiskSetup};
