use proptest::prelude::*;

use semirate::asymptotics::{laplace_kl, mi_gap_laplace, mi_gap_leading};
use semirate::loss::{bayes_decision, expconcave_ratio};
use semirate::model::ConditionalLaw;
use semirate::quadrature::{fit_posterior, predictive};
use semirate::rates::{k1, k2, k3, leading_risk};
use semirate::rng::{stream, Purpose};
use semirate::sweep::{parse_csv, rows_to_csv, SweepRow};
use semirate::{
    Decision, FisherPair, GridConfig, LabeledPoint, LossSpec, Mat, ModelKind, ModelSpec, PredictiveDist, Prior,
    RateConstants, RegimeSpec, Theta,
};

/// `I_X = L Lᵀ + εI`, `I_XY = I_X + M Mᵀ + εI`.
fn ordered_pair() -> impl Strategy<Value = FisherPair> {
    (1usize..=2, prop::array::uniform8(-2.0f64..2.0), 0.01f64..1.0, 0.01f64..1.0).prop_map(|(d, v, e1, e2)| {
        let spd = |a: f64, b: f64, c: f64, e: f64| {
            let l = if d == 1 { Mat::scalar(a) } else { Mat::new2(a, 0.0, b, c) };
            l.mul(&l.transpose()).add(&Mat::identity(d).scale(e))
        };
        let i_x = spd(v[0], v[1], v[2], e1);
        let i_xy = i_x.add(&spd(v[3], v[4], v[5], e2));
        FisherPair::new(i_xy, i_x).unwrap()
    })
}

fn regime() -> impl Strategy<Value = RegimeSpec> {
    prop_oneof![
        Just(RegimeSpec::Sl),
        (0.01f64..20.0).prop_map(|alpha| RegimeSpec::SslLinear { alpha }),
        (0.01f64..2.0).prop_map(|gamma| RegimeSpec::SslSuper { gamma }),
    ]
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn finite_f64() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn constants_are_ordered(pair in ordered_pair(), alpha in 0.0f64..50.0, beta in 0.01f64..10.0) {
        let (a, b, c) = (k1(&pair, alpha, beta).unwrap(), k2(&pair, beta).unwrap(), k3(&pair, beta).unwrap());
        let tol = 1e-10 * c.max(1.0);
        prop_assert!(a > 0.0);
        prop_assert!(a <= b + tol && b <= c + tol, "{a} {b} {c}");
        prop_assert!(b < pair.dim() as f64 / beta + tol);
    }

    #[test]
    fn k1_decreases_in_alpha(pair in ordered_pair(), a in 0.0f64..10.0, extra in 0.01f64..10.0) {
        prop_assert!(k1(&pair, a + extra, 1.0).unwrap() <= k1(&pair, a, 1.0).unwrap() + 1e-12);
    }

    #[test]
    fn constants_scale_inversely_with_beta(pair in ordered_pair(), alpha in 0.0f64..5.0, beta in 0.01f64..10.0) {
        let one = RateConstants::compute(&pair, alpha, 1.0).unwrap();
        let scaled = RateConstants::compute(&pair, alpha, beta).unwrap();
        for (u, v) in [(one.k1, scaled.k1), (one.k2, scaled.k2), (one.k3, scaled.k3)] {
            prop_assert!((u / beta - v).abs() <= 1e-12 * u.abs().max(1.0) / beta);
        }
    }

    #[test]
    fn leading_risk_halves_when_n_doubles(pair in ordered_pair(), r in regime(), n in 1usize..10_000) {
        let c = RateConstants::compute(&pair, 1.0, 1.0).unwrap();
        let ratio = leading_risk(&r, 2 * n, &c) / leading_risk(&r, n, &c);
        prop_assert!((ratio - 2f64.powf(r.slope_target())).abs() < 1e-12);
    }

    #[test]
    fn laplace_gap_is_nonnegative_and_shrinks(pair in ordered_pair(), r in regime(), n in 10usize..5000) {
        let g1 = mi_gap_laplace(&r, n, &pair).unwrap();
        let g2 = mi_gap_laplace(&r, 4 * n, &pair).unwrap();
        prop_assert!(g1 > 0.0 && g2 > 0.0);
        prop_assert!(g2 < g1);
        prop_assert!(mi_gap_leading(&r, n, &pair).unwrap() > 0.0);
    }

    #[test]
    fn laplace_kl_grows_by_half_log_two_per_dimension(pair in ordered_pair(), n in 1usize..1000, m in 0usize..1000) {
        let a = laplace_kl(&pair, n, m, 0.5).unwrap().value;
        let b = laplace_kl(&pair, 2 * n, 2 * m, 0.5).unwrap().value;
        prop_assert!((b - a - 0.5 * pair.dim() as f64 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn log_loss_ratio_at_most_one(q in simplex(4), w in simplex(4)) {
        let labels = vec![1.0, 2.0, 3.0, 4.0];
        let spec = LossSpec::log();
        let q_dist = PredictiveDist::Finite { labels: labels.clone(), probs: q.clone() };
        let w_star = bayes_decision(&spec, &q_dist).unwrap();
        let w_prime = Decision::Distribution(PredictiveDist::Finite { labels: labels.clone(), probs: w });
        prop_assert!(expconcave_ratio(&spec, &labels, &q, &w_star, &w_prime).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn square_loss_ratio_at_most_one(
        a in 0.05f64..10.0,
        q in simplex(5),
        ys in prop::collection::vec(-1.0f64..=1.0, 5),
        w in -1.0f64..=1.0,
    ) {
        let labels: Vec<f64> = ys.iter().map(|y| y * a).collect();
        let spec = LossSpec::square(a).unwrap();
        let q_dist = PredictiveDist::Finite { labels: labels.clone(), probs: q.clone() };
        let w_star = bayes_decision(&spec, &q_dist).unwrap();
        let r = expconcave_ratio(&spec, &labels, &q, &w_star, &Decision::Value(w * a)).unwrap();
        prop_assert!(r <= 1.0 + 1e-9, "{r}");
    }

    #[test]
    fn mixture_joint_factorises(t in 0.03f64..0.97, x in 0.001f64..0.999) {
        let model = ModelSpec::mixture();
        let theta = Theta::new(vec![t]);
        let lm = model.log_marginal_x(&theta, x).unwrap();
        let ConditionalLaw::Finite { probs, .. } = model.cond_y_given_x(&theta, x).unwrap() else {
            unreachable!()
        };
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for (y, p) in [(1.0, probs[0]), (2.0, probs[1])] {
            let lj = model.log_joint(&theta, &LabeledPoint::new(x, y)).unwrap();
            prop_assert!((lj - lm - p.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_joint_factorises(mu in -4.0f64..4.0, s in 0.3f64..4.0, x in -6.0f64..6.0, y in -6.0f64..6.0) {
        let model = ModelSpec::gaussian();
        let theta = Theta::new(vec![mu, s]);
        let lj = model.log_joint(&theta, &LabeledPoint::new(x, y)).unwrap();
        let lm = model.log_marginal_x(&theta, x).unwrap();
        let ConditionalLaw::Gaussian { mean, var } = model.cond_y_given_x(&theta, x).unwrap() else {
            unreachable!()
        };
        let lc = -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (y - mean).powi(2) / (2.0 * var);
        prop_assert!((lj - lm - lc).abs() < 1e-10);
    }

    #[test]
    fn regime_ids_round_trip(r in regime()) {
        let parsed: RegimeSpec = r.id().parse().unwrap();
        prop_assert_eq!(parsed, r);
    }

    #[test]
    fn csv_round_trips_exactly(
        cells in prop::collection::vec(
            (regime(), 1usize..100_000, any::<u64>(), finite_f64(), finite_f64(), prop::option::of(finite_f64())),
            1..8,
        )
    ) {
        let rows: Vec<SweepRow> = cells
            .into_iter()
            .map(|(r, n, seed, mean, se, kl)| SweepRow {
                regime: r.id(),
                n,
                m: r.unlabeled_count(n),
                reps: 100,
                seed,
                risk_mean: mean,
                risk_se: se,
                kl_mean: kl,
                kl_se: kl.map(f64::abs),
                leading_pred: None,
            })
            .collect();
        let text = rows_to_csv(&rows);
        prop_assert_eq!(parse_csv(&text).unwrap(), rows);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn posterior_and_predictive_are_normalised(
        gaussian in any::<bool>(),
        n in 0usize..60,
        m in 0usize..60,
        seed in any::<u64>(),
        x_prime in -2.0f64..2.0,
    ) {
        let (model, theta) = if gaussian {
            (ModelSpec::gaussian(), Theta::new(vec![0.3, 1.1]))
        } else {
            (ModelSpec::mixture(), Theta::new(vec![0.4]))
        };
        let x_prime = if gaussian { x_prime } else { (x_prime + 2.0) / 4.0 };
        let data = model.sample_dataset(&theta, n, m, &mut stream(seed, 0, Purpose::Sampling));
        let grid = if gaussian {
            GridConfig { resolution: vec![48], ..GridConfig::default_for(ModelKind::Gaussian) }
        } else {
            GridConfig::default_for(ModelKind::Mixture)
        };
        let post = fit_posterior(&model, &grid, &Prior::Uniform, &data).unwrap();
        let mass: f64 = post.log_weights().iter().map(|w| w.exp()).sum();
        prop_assert!((mass - 1.0).abs() < 1e-12);
        for (k, (lo, hi)) in model.domain().bounds().iter().enumerate() {
            prop_assert!(*lo <= post.mean()[k] && post.mean()[k] <= *hi);
        }
        let pred = predictive(&model, &post, x_prime).unwrap();
        prop_assert!((pred.total_mass() - 1.0).abs() < 1e-9);
        if let PredictiveDist::Finite { probs, .. } = &pred {
            prop_assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }
}
