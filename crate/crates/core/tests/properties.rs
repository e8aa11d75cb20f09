//! Property tests for the filtering, matching and evaluation invariants.

use dcmm_core::dcmm::{apply_random_effect, Component, Dcmm};
use dcmm_core::dglm::{
    match_beta, match_gamma, Block, Covariates, Link, ModelSpec, PredictorMoments, StateMoments,
};
use dcmm_core::special::{digamma, trigamma};
use dcmm_core::eval::{hpd_set, point_forecast, Loss, Predictive};
use dcmm_core::linalg::Matrix;
use proptest::prelude::*;

/// Random normalized pmf on 0..=n with strictly positive entries.
fn arb_pmf(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..1.0f64, 2..=max_len).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    })
}

proptest! {
    #[test]
    fn beta_matching_round_trips(a in 0.05f64..200.0, b in 0.05f64..200.0) {
        let f = digamma(a).unwrap() - digamma(b).unwrap();
        let q = trigamma(a).unwrap() + trigamma(b).unwrap();
        let cp = match_beta(PredictorMoments { f, q }).unwrap();
        prop_assert!((cp.alpha - a).abs() < 1e-6 * a, "alpha {} vs {a}", cp.alpha);
        prop_assert!((cp.beta - b).abs() < 1e-6 * b, "beta {} vs {b}", cp.beta);
    }

    #[test]
    fn gamma_matching_round_trips(a in 0.05f64..500.0, b in 1e-3f64..1e3) {
        let f = digamma(a).unwrap() - b.ln();
        let q = trigamma(a).unwrap();
        let cp = match_gamma(PredictorMoments { f, q }).unwrap();
        prop_assert!((cp.alpha - a).abs() < 1e-8 * a);
        prop_assert!((cp.beta - b).abs() < 1e-8 * b);
    }

    #[test]
    fn random_effect_discount_only_inflates(f in -5.0f64..5.0, q in 1e-4f64..10.0,
                                            rho in 0.05f64..1.0) {
        let pm = apply_random_effect(PredictorMoments { f, q }, rho).unwrap();
        prop_assert_eq!(pm.f, f);
        prop_assert!(pm.q >= q);
        prop_assert!((pm.q * rho - q).abs() < 1e-12 * q);
    }

    #[test]
    fn hpd_sets_are_minimal_highest_mass(masses in arb_pmf(30), level in 0.05f64..0.99) {
        let set = hpd_set(&masses, level).unwrap();
        prop_assert!(set.mass >= level);
        let lightest = set
            .members
            .iter()
            .map(|&y| masses[y as usize])
            .fold(f64::INFINITY, f64::min);
        // minimality: dropping the lightest member falls below the level
        prop_assert!(set.mass - lightest < level);
        // dominance: no excluded point outweighs an included one
        for y in 0..masses.len() as u32 {
            if set.members.binary_search(&y).is_err() {
                prop_assert!(masses[y as usize] <= lightest + 1e-15);
            }
        }
    }

    #[test]
    fn point_forecasts_beat_integer_grid(masses in arb_pmf(15),
                                         alpha in 0.05f64..0.95,
                                         c in 0.0f64..2.0) {
        let pred = Predictive::from_pmf(masses.clone()).unwrap();
        for loss in [Loss::Squared, Loss::Absolute, Loss::Pinball(alpha),
                     Loss::Ape, Loss::Zape(c)] {
            let f = point_forecast(&pred, loss).unwrap();
            let own = expected_loss(&masses, f, loss);
            for g in 0..masses.len() {
                let other = expected_loss(&masses, g as f64, loss);
                prop_assert!(own <= other + 1e-9,
                    "{loss:?}: {f} (loss {own}) beaten by {g} (loss {other})");
            }
        }
    }

    #[test]
    fn filtering_a_count_keeps_the_posterior_proper(
        level in -1.0f64..2.5, var in 0.01f64..2.0, y in 0u32..40,
        delta in 0.8f64..1.0, rho in 0.3f64..1.0,
    ) {
        let model = level_model(level, var, delta, rho);
        let (next, forecast) = model.step(y, &Covariates::new()).unwrap();
        // predictive is a proper distribution
        let total: f64 = forecast.pmf_vec().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-6, "mass {total}");
        // posterior variances stay positive and finite
        for comp in [&next.binary, &next.positive] {
            let v = comp.state.cov[(0, 0)];
            prop_assert!(v > 0.0 && v.is_finite());
            prop_assert!(comp.state.mean[0].is_finite());
        }
        // seeing data (y > 0) never inflates the positive-component
        // variance beyond the discount-only path
        if y > 0 {
            prop_assert!(next.positive.state.cov[(0, 0)] <= var / 0.8 + 1e-12);
        }
    }
}

fn level_model(level: f64, var: f64, delta: f64, rho: f64) -> Dcmm {
    let mk = |link: Link| {
        let spec = ModelSpec::new(vec![Block::Level], vec![delta], link).unwrap();
        let mut cov = Matrix::zeros(1);
        cov[(0, 0)] = var;
        Component::new(spec, StateMoments::new(vec![level], cov).unwrap()).unwrap()
    };
    let binary = mk(Link::LogitBernoulli);
    let positive = mk(Link::LogPoisson);
    let positive = Component {
        spec: positive.spec.with_re_discount(rho).unwrap(),
        state: positive.state,
    };
    Dcmm::new(binary, positive).unwrap()
}

fn expected_loss(masses: &[f64], f: f64, loss: Loss) -> f64 {
    masses
        .iter()
        .enumerate()
        .map(|(y, &p)| {
            let y = y as f64;
            p * match loss {
                Loss::Squared => (y - f) * (y - f),
                Loss::Absolute => (y - f).abs(),
                Loss::Pinball(a) => {
                    if y >= f {
                        a * (y - f)
                    } else {
                        (1.0 - a) * (f - y)
                    }
                }
                Loss::Ape => {
                    if y == 0.0 {
                        0.0
                    } else {
                        (y - f).abs() / y
                    }
                }
                Loss::Zape(c) => {
                    if y == 0.0 {
                        c * f
                    } else {
                        (y - f).abs() / y
                    }
                }
            }
        })
        .sum()
}
