mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::mixed_spec;
use liketally::negbin::{fit_negbin, FitOptions};
use liketally::synth::generate;
use liketally::tactics::{
    conditional_topic_probs, eval_score, marginal_effect, rank_candidates, topic_effects, EffectMethod,
};
use proptest::prelude::*;

#[test]
fn effects_match_recomputation_from_coefficients_and_means() {
    let spec = mixed_spec(2000, vec![2.0, 0.3, -0.2, 0.25, 0.4, -0.5, 0.0], 0.5, vec![0.3, 0.25, 0.2], 31);
    let (d, y) = generate(&spec).unwrap();
    let fit = fit_negbin(&y, &d.x, &FitOptions::default()).unwrap();
    let n = d.n_rows() as f64;
    for topic in &d.topic_columns {
        let k = d.column_index(topic).unwrap();
        // column means and linear predictors by hand
        let means: Vec<f64> = (0..d.n_cols()).map(|j| (0..d.n_rows()).map(|i| d.x[(i, j)]).sum::<f64>() / n).collect();
        let eta_at = |v: f64| -> f64 {
            (0..d.n_cols())
                .map(|j| fit.coefficients[j] * if j == k { v } else { means[j] })
                .sum()
        };
        let expected = eta_at(1.0).exp() - eta_at(0.0).exp();
        let me = marginal_effect(&fit, &d, topic, EffectMethod::Discrete).unwrap();
        assert!((me.effect - expected).abs() < 1e-9 * expected.abs().max(1.0));
        assert!(me.ci_low <= me.effect && me.effect <= me.ci_high);
        assert_eq!(me.effect > 0.0, fit.coefficients[k] > 0.0);

        let bm = marginal_effect(&fit, &d, topic, EffectMethod::BetaMu).unwrap();
        let eta_bar: f64 = (0..d.n_cols()).map(|j| fit.coefficients[j] * means[j]).sum();
        assert!((bm.effect - fit.coefficients[k] * eta_bar.exp()).abs() < 1e-9 * bm.effect.abs().max(1.0));
    }
}

#[test]
fn delta_method_matches_numeric_gradient() {
    // The delta-method variance equals g' Σ g; check it against a finite
    // difference gradient of the effect in β.
    let spec = mixed_spec(1500, vec![1.0, 0.2, 0.1, -0.2, 0.5], 0.4, vec![0.4], 32);
    let (d, y) = generate(&spec).unwrap();
    let fit = fit_negbin(&y, &d.x, &FitOptions::default()).unwrap();
    let me = marginal_effect(&fit, &d, "topic_1", EffectMethod::Discrete).unwrap();
    let means = d.column_means();
    let k = d.column_index("topic_1").unwrap();
    let effect = |b: &[f64]| {
        let eta = |v: f64| -> f64 { (0..b.len()).map(|j| b[j] * if j == k { v } else { means[j] }).sum() };
        eta(1.0).exp() - eta(0.0).exp()
    };
    let p = fit.coefficients.len();
    let h = 1e-6;
    let grad: Vec<f64> = (0..p)
        .map(|j| {
            let mut up = fit.coefficients.clone();
            let mut dn = fit.coefficients.clone();
            up[j] += h;
            dn[j] -= h;
            (effect(&up) - effect(&dn)) / (2.0 * h)
        })
        .collect();
    let cov = fit.beta_covariance();
    let var: f64 = (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| grad[i] * cov[(i, j)] * grad[j]).sum();
    assert!((var.sqrt() - me.se).abs() < 1e-5 * me.se);
}

#[test]
fn effect_sign_follows_coefficient() {
    for seed in 0..10 {
        let spec = mixed_spec(600, vec![1.0, 0.1, 0.1, 0.1, 0.3, -0.3], 0.5, vec![0.3, 0.3], 200 + seed);
        let (d, y) = generate(&spec).unwrap();
        let fit = fit_negbin(&y, &d.x, &FitOptions::default()).unwrap();
        let effects = topic_effects(&fit, &d, EffectMethod::Discrete).unwrap();
        for (t, e) in effects {
            let b = fit.coefficients[d.column_index(&t).unwrap()];
            assert_eq!(e.effect > 0.0, b > 0.0, "{t}: effect {} beta {b}", e.effect);
        }
    }
}

fn label_sets() -> impl Strategy<Value = Vec<BTreeSet<String>>> {
    prop::collection::vec(
        prop::collection::btree_set(prop::sample::select(vec!["a", "b", "c", "d", "x"]), 0..4)
            .prop_map(|s| s.into_iter().map(String::from).collect()),
        1..40,
    )
}

proptest! {
    #[test]
    fn probabilities_lie_in_unit_interval(labels in label_sets()) {
        let universe: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        if let Ok(p) = conditional_topic_probs(&labels, &universe) {
            for v in p.values() {
                prop_assert!((0.0..=1.0).contains(v));
            }
            prop_assert!(p.values().sum::<f64>() >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn disjoint_single_labels_sum_to_one(topics in prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 1..40)) {
        let labels: Vec<BTreeSet<String>> = topics.iter().map(|t| BTreeSet::from([t.to_string()])).collect();
        let universe: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let p = conditional_topic_probs(&labels, &universe).unwrap();
        prop_assert!((p.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_is_linear_in_effects(fs in prop::collection::vec(-100.0f64..100.0, 4), c in -5.0f64..5.0, labels in label_sets()) {
        let universe: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        prop_assume!(conditional_topic_probs(&labels, &universe).is_ok());
        let p = conditional_topic_probs(&labels, &universe).unwrap();
        let f: BTreeMap<String, f64> = universe.iter().cloned().zip(fs.iter().copied()).collect();
        let scaled: BTreeMap<String, f64> = f.iter().map(|(k, v)| (k.clone(), v * c)).collect();
        let s = eval_score(&f, &p).unwrap();
        let sc = eval_score(&scaled, &p).unwrap();
        prop_assert!((sc - c * s).abs() < 1e-9 * (1.0 + s.abs() * c.abs()));
    }

    #[test]
    fn ranking_survives_increasing_transforms(scores in prop::collection::btree_map("[a-z]{1,6}", -1e3f64..1e3, 1..10)) {
        let base = rank_candidates(scores.iter().map(|(k, v)| (k.as_str(), *v)));
        let transformed = rank_candidates(scores.iter().map(|(k, v)| (k.as_str(), (v / 100.0).exp() * 3.0 + 1.0)));
        let order = |r: &[liketally::tactics::RankedCandidate]| r.iter().map(|x| x.candidate.clone()).collect::<Vec<_>>();
        prop_assert_eq!(order(&base), order(&transformed));
        let ranks: Vec<usize> = base.iter().map(|r| r.rank).collect();
        prop_assert_eq!(ranks, (1..=scores.len()).collect::<Vec<_>>());
    }
}
