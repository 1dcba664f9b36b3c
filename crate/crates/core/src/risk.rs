//! Monte Carlo estimation of excess risk against the oracle decision.
//!
//! Replication `r` draws `n` labeled pairs, `m` unlabeled features and a test
//! feature `X'` from the stream `(seed, r)`, forms the posterior predictive and
//! its Bayes decision, and evaluates the excess loss with the expectation over
//! `Y' ~ p_θ0(· | X')` taken exactly: a finite sum for a finite alphabet, and a
//! 256-node trapezoid rule over `±8` conditional standard deviations otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::loss::{bayes_decision, loss, oracle_decision, Decision, LossKind, LossSpec};
use crate::model::{ConditionalLaw, ModelSpec, Theta};
use crate::numeric::{mean_and_se, normal_pdf};
use crate::quadrature::{fit_posterior_summary, predictive, GridConfig, PredictiveDist, Prior};
use crate::rates::RegimeSpec;
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

pub const MIN_REPS: usize = 100;
pub const Y_QUAD_NODES: usize = 256;
pub const Y_QUAD_HALF_WIDTH: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub reps: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(reps: usize, seed: u64) -> Self {
        McConfig { reps, seed }
    }

    fn check(&self, min: usize) -> Result<()> {
        if self.reps < min {
            return Err(Error::InvalidConfig(format!("need at least {min} replications, got {}", self.reps)));
        }
        Ok(())
    }
}

/// Everything fixed across replications: model, truth, prior and quadrature.
#[derive(Debug, Clone)]
pub struct RiskSetup {
    pub model: ModelSpec,
    pub theta0: Theta,
    pub prior: Prior,
    pub grid: GridConfig,
}

impl RiskSetup {
    /// Default grid, uniform prior; `theta0` must lie strictly inside the model box.
    pub fn new(model: ModelSpec, theta0: Vec<f64>) -> Result<Self> {
        let theta0 = model.theta(theta0)?;
        let grid = GridConfig::default_for(model.kind());
        Ok(RiskSetup { model, theta0, prior: Prior::Uniform, grid })
    }

    pub fn with_grid(mut self, grid: GridConfig) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_prior(mut self, prior: Prior) -> Self {
        self.prior = prior;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: usize,
    pub infinite_loss_events: usize,
    pub seed: u64,
    pub regime: RegimeSpec,
    pub n: usize,
    pub m: usize,
}

/// Posterior predictive for one replication, plus the test feature.
pub(crate) struct Replicate {
    pub x_prime: f64,
    pub predictive: PredictiveDist,
}

pub(crate) fn replicate(
    model: &ModelSpec,
    theta: &Theta,
    prior: &Prior,
    grid: &GridConfig,
    n: usize,
    m: usize,
    rng: &mut crate::rng::StreamRng,
) -> Result<Replicate> {
    let data = model.sample_dataset(theta, n, m, rng);
    let x_prime = model.sample_x(theta, rng);
    let summary = model.summarize(&data)?;
    let post = fit_posterior_summary(model, grid, prior, &summary, n + m)?;
    let predictive = predictive(model, &post, x_prime)?;
    Ok(Replicate { x_prime, predictive })
}

/// Trapezoid nodes over `mean ± 8 sd`: `(y_i, h_i, p(y_i))`.
fn y_quadrature(mean: f64, var: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let sd = var.sqrt();
    let lo = mean - Y_QUAD_HALF_WIDTH * sd;
    let h = 2.0 * Y_QUAD_HALF_WIDTH * sd / (Y_QUAD_NODES - 1) as f64;
    let ys: Vec<f64> = (0..Y_QUAD_NODES).map(|i| lo + h * i as f64).collect();
    let hs = (0..Y_QUAD_NODES).map(|i| if i == 0 || i == Y_QUAD_NODES - 1 { 0.5 * h } else { h }).collect();
    let ps = ys.iter().map(|&y| normal_pdf(y, mean, var)).collect();
    (ys, hs, ps)
}

/// `E_{Y ~ truth}[ℓ(decision, Y) - ℓ(oracle, Y)]`. `Ok(None)` flags an infinite loss.
pub(crate) fn expected_excess(
    spec: &LossSpec,
    truth: &ConditionalLaw,
    decision: &Decision,
    oracle: &Decision,
) -> Result<Option<f64>> {
    let (ys, ws) = match truth {
        ConditionalLaw::Finite { labels, probs } => (labels.clone(), probs.clone()),
        ConditionalLaw::Gaussian { mean, var } => {
            let (ys, hs, ps) = y_quadrature(*mean, *var);
            (ys, hs.iter().zip(&ps).map(|(h, p)| h * p).collect())
        }
    };
    // Log-loss densities for a continuous predictive are evaluated in one batch.
    let batch = match (spec.kind, decision, truth) {
        (
            LossKind::SelfInformation,
            Decision::Distribution(PredictiveDist::Continuous(g)),
            ConditionalLaw::Gaussian { .. },
        ) => Some(g.pdf_many(&ys)),
        _ => None,
    };
    let mut total = 0.0;
    for (i, (&y, &w)) in ys.iter().zip(&ws).enumerate() {
        if w == 0.0 {
            continue;
        }
        let ours = match &batch {
            Some(q) => -q[i].ln(),
            None => loss(spec, decision, y)?,
        };
        let best = loss(spec, oracle, y)?;
        if ours.is_infinite() || best.is_infinite() {
            return Ok(None);
        }
        total += w * (ours - best);
    }
    Ok(Some(total))
}

/// `KL(truth ‖ predictive)`, summed with the pointwise nonnegative integrand
/// `p ln(p/q) - p + q` (the extra terms integrate to zero).
pub(crate) fn kl_truth_predictive(truth: &ConditionalLaw, pred: &PredictiveDist) -> Option<f64> {
    let term = |p: f64, q: f64| -> f64 {
        if p == 0.0 {
            return q;
        }
        (p * (p / q).ln() - p + q).max(0.0)
    };
    let total = match (truth, pred) {
        (ConditionalLaw::Finite { probs, .. }, PredictiveDist::Finite { probs: q, .. }) => {
            probs.iter().zip(q).map(|(&p, &q)| term(p, q)).sum::<f64>()
        }
        (ConditionalLaw::Gaussian { mean, var }, PredictiveDist::Continuous(g)) => {
            let (ys, hs, ps) = y_quadrature(*mean, *var);
            let qs = g.pdf_many(&ys);
            hs.iter().zip(&ps).zip(&qs).map(|((h, &p), &q)| h * term(p, q)).sum::<f64>()
        }
        _ => return None,
    };
    total.is_finite().then_some(total)
}

fn aggregate(values: Vec<Option<f64>>, mc: &McConfig, regime: RegimeSpec, n: usize, m: usize) -> RiskEstimate {
    let infinite = values.iter().filter(|v| v.is_none()).count();
    let finite: Vec<f64> = values.into_iter().flatten().collect();
    let (mean, std_error) = mean_and_se(&finite);
    RiskEstimate { mean, std_error, replications: mc.reps, infinite_loss_events: infinite, seed: mc.seed, regime, n, m }
}

fn check_loss_model(model: &ModelSpec, spec: &LossSpec) -> Result<()> {
    if spec.kind == LossKind::ZeroOne && !model.is_finite_alphabet() {
        return Err(Error::Unsupported("0-1 loss needs a finite label alphabet".into()));
    }
    Ok(())
}

/// Mean excess loss of the Bayes-mixture decision over the oracle decision.
pub fn excess_risk(
    setup: &RiskSetup,
    regime: RegimeSpec,
    n: usize,
    spec: &LossSpec,
    mc: &McConfig,
) -> Result<RiskEstimate> {
    mc.check(MIN_REPS)?;
    regime.validate()?;
    check_loss_model(&setup.model, spec)?;
    let m = regime.unlabeled_count(n);
    let values = (0..mc.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(mc.seed, r as u64, Purpose::Replication);
            let rep = replicate(&setup.model, &setup.theta0, &setup.prior, &setup.grid, n, m, &mut rng)?;
            let truth = setup.model.cond_y_given_x(&setup.theta0, rep.x_prime)?;
            let ours = bayes_decision(spec, &rep.predictive)?;
            let best = oracle_decision(&setup.model, &setup.theta0, rep.x_prime, spec)?;
            expected_excess(spec, &truth, &ours, &best)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(values, mc, regime, n, m))
}

/// Mean of `KL(p_θ0(· | X') ‖ Q(· | data, X'))`: the log-loss excess computed
/// as a divergence, pointwise nonnegative.
pub fn excess_risk_kl_form(setup: &RiskSetup, regime: RegimeSpec, n: usize, mc: &McConfig) -> Result<RiskEstimate> {
    mc.check(MIN_REPS)?;
    regime.validate()?;
    let m = regime.unlabeled_count(n);
    let values = (0..mc.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(mc.seed, r as u64, Purpose::Replication);
            let rep = replicate(&setup.model, &setup.theta0, &setup.prior, &setup.grid, n, m, &mut rng)?;
            let truth = setup.model.cond_y_given_x(&setup.theta0, rep.x_prime)?;
            Ok(kl_truth_predictive(&truth, &rep.predictive))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(values, mc, regime, n, m))
}

/// Same replications as [`excess_risk_kl_form`], returning every per-replication value.
pub fn kl_form_values(setup: &RiskSetup, regime: RegimeSpec, n: usize, mc: &McConfig) -> Result<Vec<Option<f64>>> {
    let m = regime.unlabeled_count(n);
    (0..mc.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(mc.seed, r as u64, Purpose::Replication);
            let rep = replicate(&setup.model, &setup.theta0, &setup.prior, &setup.grid, n, m, &mut rng)?;
            let truth = setup.model.cond_y_given_x(&setup.theta0, rep.x_prime)?;
            Ok(kl_truth_predictive(&truth, &rep.predictive))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FloorPoint {
    pub n: usize,
    pub min_prob: f64,
    pub reps: usize,
}

/// Smallest predictive probability assigned to the oracle 0-1 label over
/// `reps` supervised replications.
pub fn map_posterior_floor(setup: &RiskSetup, n: usize, reps: usize, seed: u64) -> Result<FloorPoint> {
    if !setup.model.is_finite_alphabet() {
        return Err(Error::Unsupported("floor diagnostic needs a finite label alphabet".into()));
    }
    if reps == 0 {
        return Err(Error::InvalidConfig("floor needs at least one replication".into()));
    }
    let spec = LossSpec::zero_one();
    let probs = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64, Purpose::Floor);
            let rep = replicate(&setup.model, &setup.theta0, &setup.prior, &setup.grid, n, 0, &mut rng)?;
            match oracle_decision(&setup.model, &setup.theta0, rep.x_prime, &spec)? {
                Decision::Label(y) => Ok(rep.predictive.prob(y)),
                _ => unreachable!("0-1 oracle returns a label"),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let min_prob = probs.into_iter().fold(f64::INFINITY, f64::min);
    Ok(FloorPoint { n, min_prob, reps })
}

pub fn floor_trace(setup: &RiskSetup, n_values: &[usize], reps: usize, seed: u64) -> Result<Vec<FloorPoint>> {
    n_values.iter().map(|&n| map_posterior_floor(setup, n, reps, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use crate::ParamDomain;

    fn mixture_setup() -> RiskSetup {
        RiskSetup::new(ModelSpec::mixture(), vec![0.5]).unwrap()
    }

    #[test]
    fn oracle_decision_has_zero_excess() {
        let setup = mixture_setup();
        for spec in [LossSpec::log(), LossSpec::zero_one(), LossSpec::square(2.0).unwrap()] {
            for x in [0.1, 0.5, 0.8] {
                let truth = setup.model.cond_y_given_x(&setup.theta0, x).unwrap();
                let best = oracle_decision(&setup.model, &setup.theta0, x, &spec).unwrap();
                assert!(expected_excess(&spec, &truth, &best, &best).unwrap().unwrap().abs() < 1e-15);
            }
        }
        let g = ModelSpec::gaussian();
        let t = Theta::new(vec![0.0, 1.0]);
        let truth = g.cond_y_given_x(&t, 0.4).unwrap();
        for spec in [LossSpec::log(), LossSpec::square(1.0).unwrap()] {
            let best = oracle_decision(&g, &t, 0.4, &spec).unwrap();
            assert!(expected_excess(&spec, &truth, &best, &best).unwrap().unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn no_data_predictive_is_exact_at_half() {
        // Symmetric box around 1/2: Q(y = 1 | x') = x' = p_{1/2}(y = 1 | x').
        let setup = mixture_setup();
        let mc = McConfig::new(200, 4);
        let r = excess_risk(&setup, RegimeSpec::Sl, 0, &LossSpec::log(), &mc).unwrap();
        assert!(r.mean.abs() < 1e-10, "{}", r.mean);
        let k = excess_risk_kl_form(&setup, RegimeSpec::Sl, 0, &mc).unwrap();
        assert!(k.mean.abs() < 1e-10);
        assert_eq!(k.infinite_loss_events, 0);
    }

    #[test]
    fn kl_values_nonnegative_and_match_plain_form() {
        let setup = mixture_setup();
        let mc = McConfig::new(300, 8);
        let vals = kl_form_values(&setup, RegimeSpec::SslLinear { alpha: 1.0 }, 30, &mc).unwrap();
        assert!(vals.iter().all(|v| v.unwrap() >= 0.0));
        let a = excess_risk(&setup, RegimeSpec::SslLinear { alpha: 1.0 }, 30, &LossSpec::log(), &mc).unwrap();
        let b = excess_risk_kl_form(&setup, RegimeSpec::SslLinear { alpha: 1.0 }, 30, &mc).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-12);
        assert_eq!(b.m, 30);
    }

    #[test]
    fn gaussian_kl_form_matches_plain_form() {
        let setup = RiskSetup::new(ModelSpec::gaussian(), vec![0.0, 1.0]).unwrap();
        let mc = McConfig::new(100, 2);
        let a = excess_risk(&setup, RegimeSpec::Sl, 20, &LossSpec::log(), &mc).unwrap();
        let b = excess_risk_kl_form(&setup, RegimeSpec::Sl, 20, &mc).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-6 * b.mean, "{} vs {}", a.mean, b.mean);
        assert!(b.mean > 0.0);
    }

    #[test]
    fn validation_errors() {
        let setup = mixture_setup();
        assert!(excess_risk(&setup, RegimeSpec::Sl, 10, &LossSpec::log(), &McConfig::new(99, 1)).is_err());
        let g = RiskSetup::new(ModelSpec::gaussian(), vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            excess_risk(&g, RegimeSpec::Sl, 10, &LossSpec::zero_one(), &McConfig::new(100, 1)),
            Err(Error::Unsupported(_))
        ));
        assert!(map_posterior_floor(&g, 10, 10, 1).is_err());
    }

    #[test]
    fn floor_without_data_is_closed_form() {
        let setup = mixture_setup();
        let reps = 50;
        let f = map_posterior_floor(&setup, 0, reps, 21).unwrap();
        // Replay the same test features: the floor is min max(x', 1 - x').
        let expect = (0..reps)
            .map(|r| {
                let mut rng = stream(21, r as u64, Purpose::Floor);
                let x = setup.model.sample_x(&setup.theta0, &mut rng);
                x.max(1.0 - x)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((f.min_prob - expect).abs() < 1e-10);
        let again = map_posterior_floor(&setup, 0, reps, 21).unwrap();
        assert_eq!(f.min_prob.to_bits(), again.min_prob.to_bits());
    }

    #[test]
    fn point_mass_at_truth_has_zero_risk() {
        let model = ModelSpec::new(ModelKind::Mixture, ParamDomain::new(vec![(0.02, 0.98)]).unwrap()).unwrap();
        let setup = RiskSetup::new(model, vec![0.3]).unwrap();
        let setup = RiskSetup { prior: Prior::PointMass(setup.theta0.clone()), ..setup };
        let r = excess_risk_kl_form(&setup, RegimeSpec::Sl, 25, &McConfig::new(100, 3)).unwrap();
        assert!(r.mean.abs() < 1e-15, "{}", r.mean);
    }
}
