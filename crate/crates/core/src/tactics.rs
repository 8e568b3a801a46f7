//! Tactic evaluation: topic marginal effects, conditional topic
//! probabilities, the expected-likes score and the cross-candidate ranking.
//!
//! A candidate's score is `Σ_j f(j) p(j)` where `f(j)` is the marginal
//! effect of topic `j` on expected likes and `p(j)` is the share of the
//! candidate's topic-bearing tweets that raise `j`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::DesignMatrix;
use crate::negbin::FitResult;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TacticsError {
    #[error("topic {0:?} is not a column of the fitted model")]
    UnknownTopic(String),
    #[error("design has {design} columns but the fit has {fit} coefficients")]
    Mismatch { design: usize, fit: usize },
    #[error("no tweet raises any topic")]
    NoTopicalTweets,
    #[error("no topic has both an effect and a probability")]
    DegenerateScore,
}

impl TacticsError {
    pub fn kind(&self) -> &'static str {
        match self {
            TacticsError::UnknownTopic(_) => "unknown_topic",
            TacticsError::Mismatch { .. } => "dimension",
            TacticsError::NoTopicalTweets => "no_topical_tweets",
            TacticsError::DegenerateScore => "degenerate_score",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectMethod {
    /// `exp(η̄₁) − exp(η̄₀)`: the topic switched from 0 to 1 with every other
    /// covariate at its sample mean.
    #[default]
    Discrete,
    /// `β_j exp(η̄)`: the derivative of the mean at the covariate means.
    BetaMu,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalEffect {
    pub topic_id: String,
    pub effect: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: EffectMethod,
}

/// Marginal effect of `topic_id` on expected likes with a 95% delta-method
/// interval. `design` must be the design `fit` was estimated on.
pub fn marginal_effect(
    fit: &FitResult,
    design: &DesignMatrix,
    topic_id: &str,
    method: EffectMethod,
) -> Result<MarginalEffect, TacticsError> {
    if design.n_cols() != fit.coefficients.len() {
        return Err(TacticsError::Mismatch {
            design: design.n_cols(),
            fit: fit.coefficients.len(),
        });
    }
    let k = design
        .column_index(topic_id)
        .ok_or_else(|| TacticsError::UnknownTopic(topic_id.to_string()))?;
    let beta = DVector::from_column_slice(&fit.coefficients);
    let means = DVector::from_vec(design.column_means());

    let (effect, grad) = match method {
        EffectMethod::Discrete => {
            let mut on = means.clone();
            let mut off = means;
            on[k] = 1.0;
            off[k] = 0.0;
            let mu_on = on.dot(&beta).exp();
            let mu_off = off.dot(&beta).exp();
            (mu_on - mu_off, on * mu_on - off * mu_off)
        }
        EffectMethod::BetaMu => {
            let mu = means.dot(&beta).exp();
            let mut grad = &means * (beta[k] * mu);
            grad[k] += mu;
            (beta[k] * mu, grad)
        }
    };
    let var = (grad.transpose() * fit.beta_covariance() * &grad)[(0, 0)];
    let se = var.max(0.0).sqrt();
    Ok(MarginalEffect {
        topic_id: topic_id.to_string(),
        effect,
        se,
        ci_low: effect - Z_95 * se,
        ci_high: effect + Z_95 * se,
        method,
    })
}

/// Effects for every topic column of the fitted design.
pub fn topic_effects(
    fit: &FitResult,
    design: &DesignMatrix,
    method: EffectMethod,
) -> Result<BTreeMap<String, MarginalEffect>, TacticsError> {
    design
        .topic_columns
        .iter()
        .map(|t| Ok((t.clone(), marginal_effect(fit, design, t, method)?)))
        .collect()
}

/// `p(j | at least one topic)` over `universe` from per-tweet topic sets.
///
/// The denominator counts tweets raising at least one universe topic; a
/// multi-labeled tweet adds to every matching numerator, so the
/// probabilities can sum to more than one.
pub fn conditional_topic_probs<'a, I>(
    labels: I,
    universe: &[String],
) -> Result<BTreeMap<String, f64>, TacticsError>
where
    I: IntoIterator<Item = &'a BTreeSet<String>>,
{
    let (counts, topical) = topic_counts(labels, universe);
    if topical == 0 {
        return Err(TacticsError::NoTopicalTweets);
    }
    Ok(counts
        .into_iter()
        .map(|(t, c)| (t, c as f64 / topical as f64))
        .collect())
}

/// Per-topic tweet counts over `universe` and the number of tweets raising
/// at least one universe topic.
pub fn topic_counts<'a, I>(labels: I, universe: &[String]) -> (BTreeMap<String, usize>, usize)
where
    I: IntoIterator<Item = &'a BTreeSet<String>>,
{
    let mut counts: BTreeMap<String, usize> = universe.iter().map(|t| (t.clone(), 0)).collect();
    let mut topical = 0;
    for topics in labels {
        let mut any = false;
        for t in topics {
            if let Some(c) = counts.get_mut(t) {
                *c += 1;
                any = true;
            }
        }
        topical += usize::from(any);
    }
    (counts, topical)
}

/// `Σ_j f(j) p(j)` over topics present in both maps. Topics with positive
/// probability but no effect estimate are skipped with a warning.
pub fn eval_score(
    effects: &BTreeMap<String, f64>,
    probs: &BTreeMap<String, f64>,
) -> Result<f64, TacticsError> {
    let mut score = 0.0;
    let mut used = 0;
    for (topic, &p) in probs {
        match effects.get(topic) {
            Some(&f) => {
                score += f * p;
                used += 1;
            }
            None if p > 0.0 => log::warn!("topic {topic} (p = {p}) has no effect estimate; skipped"),
            None => {}
        }
    }
    if used == 0 {
        return Err(TacticsError::DegenerateScore);
    }
    Ok(score)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub candidate: String,
    pub score: f64,
    pub rank: usize,
}

/// Ranks by descending score; equal scores go in candidate id order.
pub fn rank_candidates<'a, I>(scores: I) -> Vec<RankedCandidate>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut rows: Vec<(&str, f64)> = scores.into_iter().collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    rows.into_iter()
        .enumerate()
        .map(|(i, (c, s))| RankedCandidate {
            candidate: c.to_string(),
            score: s,
            rank: i + 1,
        })
        .collect()
}

/// Everything the score of one candidate is made of.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTactics {
    pub candidate: String,
    pub probs: BTreeMap<String, f64>,
    pub effects: BTreeMap<String, MarginalEffect>,
    pub score: f64,
}

impl CandidateTactics {
    /// Effects and probabilities for `candidate`, from its fitted model and
    /// the topic sets of its non-retweet tweets.
    pub fn evaluate<'a, I>(
        fit: &FitResult,
        design: &DesignMatrix,
        labels: I,
        universe: &[String],
        method: EffectMethod,
    ) -> Result<Self, TacticsError>
    where
        I: IntoIterator<Item = &'a BTreeSet<String>>,
    {
        let probs = conditional_topic_probs(labels, universe)?;
        let effects = topic_effects(fit, design, method)?;
        let f: BTreeMap<String, f64> = effects.iter().map(|(t, e)| (t.clone(), e.effect)).collect();
        let score = eval_score(&f, &probs)?;
        Ok(CandidateTactics {
            candidate: design.candidate.clone(),
            probs,
            effects,
            score,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectSummary {
    pub effect: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// JSON form: `{probs, effects: {topic: {effect, ci_low, ci_high}}, score, rank}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TacticReport {
    pub probs: BTreeMap<String, f64>,
    pub effects: BTreeMap<String, EffectSummary>,
    pub score: f64,
    pub rank: usize,
}

/// Ranks the candidates and assembles their reports, keyed by candidate.
pub fn tactic_reports(tactics: &[CandidateTactics]) -> BTreeMap<String, TacticReport> {
    let ranks = rank_candidates(tactics.iter().map(|t| (t.candidate.as_str(), t.score)));
    let rank_of: BTreeMap<&str, usize> = ranks.iter().map(|r| (r.candidate.as_str(), r.rank)).collect();
    tactics
        .iter()
        .map(|t| {
            let effects = t
                .effects
                .iter()
                .map(|(k, e)| {
                    (
                        k.clone(),
                        EffectSummary {
                            effect: e.effect,
                            ci_low: e.ci_low,
                            ci_high: e.ci_high,
                        },
                    )
                })
                .collect();
            (
                t.candidate.clone(),
                TacticReport {
                    probs: t.probs.clone(),
                    effects,
                    score: t.score,
                    rank: rank_of[t.candidate.as_str()],
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn universe(ids: &[&str]) -> Vec<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn probs_single_labels() {
        let labels = [set(&["a"]), set(&["b"]), set(&["b"]), set(&["b"]), set(&[])];
        let p = conditional_topic_probs(&labels, &universe(&["a", "b"])).unwrap();
        assert_eq!(p["a"], 0.25);
        assert_eq!(p["b"], 0.75);
    }

    #[test]
    fn probs_multi_labels_may_exceed_one() {
        let labels = [set(&["a", "b"]), set(&["a", "b"])];
        let p = conditional_topic_probs(&labels, &universe(&["a", "b"])).unwrap();
        assert_eq!((p["a"], p["b"]), (1.0, 1.0));
    }

    #[test]
    fn probs_need_a_topical_tweet() {
        let labels = [set(&[]), set(&["own_name"])];
        assert_eq!(
            conditional_topic_probs(&labels, &universe(&["a"])).unwrap_err(),
            TacticsError::NoTopicalTweets
        );
    }

    #[test]
    fn score_examples() {
        assert_eq!(eval_score(&map(&[("a", 2.0)]), &map(&[("a", 1.0)])).unwrap(), 2.0);
        let s = eval_score(&map(&[("a", 1.0), ("b", 3.0)]), &map(&[("a", 0.25), ("b", 0.75)])).unwrap();
        assert_eq!(s, 2.5);
        // topics without an effect estimate are skipped
        let s = eval_score(&map(&[("a", 1.0)]), &map(&[("a", 0.5), ("pruned", 0.5)])).unwrap();
        assert_eq!(s, 0.5);
        assert_eq!(
            eval_score(&map(&[("a", 1.0)]), &map(&[("b", 1.0)])).unwrap_err(),
            TacticsError::DegenerateScore
        );
    }

    #[test]
    fn ranking_and_ties() {
        let r = rank_candidates([("solo", -3.0)]);
        assert_eq!(r[0].rank, 1);
        let r = rank_candidates([("b", 1.0), ("a", 1.0), ("c", 2.0)]);
        let order: Vec<_> = r.iter().map(|x| x.candidate.as_str()).collect();
        assert_eq!(order, ["c", "a", "b"]);
        assert_eq!(r.iter().map(|x| x.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }
}
