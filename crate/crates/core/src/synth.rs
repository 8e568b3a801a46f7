//! Synthetic data with known parameters.
//!
//! Counts are drawn as a Gamma-mixed Poisson: `λ = μ·G` with
//! `G ~ Gamma(shape 1/α, scale α)` and `y ~ Poisson(λ)`, which gives
//! `E[y] = μ` and `Var[y] = μ + αμ²`. `α = 0` draws plain Poisson counts.
//!
//! All randomness comes from `ChaCha8Rng` seeded from the `seed` field. The
//! `rand`, `rand_chacha` and `rand_distr` versions are pinned exactly in
//! `Cargo.toml`; a version bump may change generated values.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FollowerSeries, FollowerSnapshot, Tweet};
use crate::features::{DesignMatrix, FOLLOWERS, HYPERLINK, INTERCEPT, LENGTH, SELF_REFERENCE};
use crate::labeler::RuleSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlDist {
    Uniform { low: f64, high: f64 },
    /// Integers in `[low, high]`.
    UniformInt { low: i64, high: i64 },
    Bernoulli { p: f64 },
    Normal { mean: f64, sd: f64 },
}

impl ControlDist {
    fn validate(&self) -> Result<(), SynthError> {
        match *self {
            ControlDist::Uniform { low, high } if !(low < high) => Err(invalid("uniform needs low < high")),
            ControlDist::UniformInt { low, high } if low > high => Err(invalid("uniform_int needs low <= high")),
            ControlDist::Bernoulli { p } if !(0.0..=1.0).contains(&p) => Err(invalid("bernoulli p outside [0, 1]")),
            ControlDist::Normal { sd, .. } if !(sd > 0.0) => Err(invalid("normal sd must be positive")),
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ControlDist::Uniform { low, high } => rng.random_range(low..high),
            ControlDist::UniformInt { low, high } => rng.random_range(low..=high) as f64,
            ControlDist::Bernoulli { p } => f64::from(u8::from(rng.random_bool(p))),
            ControlDist::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub name: String,
    pub dist: ControlDist,
}

/// A design with an intercept, the listed controls and binary topics.
/// `beta` is ordered intercept, controls, topics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub beta: Vec<f64>,
    /// 0 draws Poisson counts.
    pub alpha: f64,
    pub controls: Vec<ControlSpec>,
    pub topic_prevalences: Vec<f64>,
    /// Defaults to `topic_1, topic_2, ...` when empty.
    #[serde(default)]
    pub topic_names: Vec<String>,
    pub seed: u64,
}

impl SynthSpec {
    /// Controls shaped like the tweet design: followers in millions, words,
    /// hyperlink and self-reference indicators.
    pub fn tweet_controls() -> Vec<ControlSpec> {
        vec![
            ControlSpec {
                name: FOLLOWERS.into(),
                dist: ControlDist::Uniform { low: 2.0, high: 8.0 },
            },
            ControlSpec {
                name: LENGTH.into(),
                dist: ControlDist::UniformInt { low: 5, high: 30 },
            },
            ControlSpec {
                name: HYPERLINK.into(),
                dist: ControlDist::Bernoulli { p: 0.5 },
            },
            ControlSpec {
                name: SELF_REFERENCE.into(),
                dist: ControlDist::Bernoulli { p: 0.2 },
            },
        ]
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec![INTERCEPT.to_string()];
        names.extend(self.controls.iter().map(|c| c.name.clone()));
        names.extend(self.topic_names());
        names
    }

    pub fn topic_names(&self) -> Vec<String> {
        if self.topic_names.is_empty() {
            (1..=self.topic_prevalences.len()).map(|i| format!("topic_{i}")).collect()
        } else {
            self.topic_names.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        let cols = 1 + self.controls.len() + self.topic_prevalences.len();
        if self.beta.len() != cols {
            return Err(invalid(format!("beta has {} entries, design has {cols} columns", self.beta.len())));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(invalid("beta must be finite"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha must be finite and >= 0"));
        }
        if self.topic_prevalences.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("topic prevalences must lie in [0, 1]"));
        }
        if !self.topic_names.is_empty() && self.topic_names.len() != self.topic_prevalences.len() {
            return Err(invalid("one topic name per prevalence"));
        }
        for c in &self.controls {
            c.dist.validate()?;
        }
        Ok(())
    }
}

/// One NB2 (or Poisson, at `alpha = 0`) draw with mean `mu`.
pub fn draw_count(mu: f64, alpha: f64, rng: &mut ChaCha8Rng) -> u64 {
    let lambda = if alpha > 0.0 {
        mu * Gamma::new(1.0 / alpha, alpha).expect("positive shape").sample(rng)
    } else {
        mu
    };
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda.min(Poisson::<f64>::MAX_LAMBDA))
        .expect("positive rate")
        .sample(rng) as u64
}

/// Draws a design and counts. The returned design also holds `y`.
pub fn generate(spec: &SynthSpec) -> Result<(DesignMatrix, Vec<u64>), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let names = spec.column_names();
    let p = names.len();
    let mut data = Vec::with_capacity(spec.n * p);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let start = data.len();
        data.push(1.0);
        for c in &spec.controls {
            data.push(c.dist.sample(&mut rng));
        }
        for &prev in &spec.topic_prevalences {
            data.push(f64::from(u8::from(rng.random_bool(prev))));
        }
        let eta: f64 = data[start..].iter().zip(&spec.beta).map(|(x, b)| x * b).sum();
        y.push(draw_count(eta.exp(), spec.alpha, &mut rng));
    }
    let x = DMatrix::from_row_slice(spec.n, p, &data);
    let design = DesignMatrix::new("synthetic", y.clone(), names, x, spec.topic_names())
        .map_err(|e| invalid(e.to_string()))?;
    Ok((design, y))
}

/// Ground truth for one candidate of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSynth {
    /// Must be a figure topic of the rule set for self-references to work.
    pub id: String,
    pub n_tweets: usize,
    pub alpha: f64,
    pub intercept: f64,
    pub beta_followers: f64,
    pub beta_length: f64,
    pub beta_hyperlink: f64,
    pub beta_self_reference: f64,
    /// Topic id to (prevalence, coefficient).
    pub topics: BTreeMap<String, (f64, f64)>,
    pub followers_start: u64,
    pub followers_end: u64,
    pub length_range: (usize, usize),
    pub hyperlink_rate: f64,
    pub self_reference_rate: f64,
    /// Extra retweets per original tweet; their likes are noise.
    #[serde(default)]
    pub retweet_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub start: NaiveDate,
    pub days: u32,
    pub candidates: Vec<CandidateSynth>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub tweets: Vec<Tweet>,
    pub followers: FollowerSeries,
}

const FILLER: [&str; 24] = [
    "vote", "today", "thank", "you", "we", "will", "stand", "together", "people", "our", "future",
    "join", "rally", "tonight", "great", "support", "team", "country", "proud", "every", "family",
    "hope", "work", "win",
];

/// Generates a tweet corpus and follower series whose labels, controls and
/// like counts follow each candidate's ground truth. Topic markers are the
/// first pattern of each topic rule; the rest of each tweet is filler that
/// matches no rule.
pub fn generate_corpus(spec: &CorpusSpec, rules: &RuleSet) -> Result<SynthCorpus, SynthError> {
    if spec.days == 0 {
        return Err(invalid("days must be at least 1"));
    }
    let filler: Vec<&str> = FILLER.iter().copied().filter(|w| rules.label(w).is_empty()).collect();
    if filler.is_empty() {
        return Err(invalid("every filler word matches a rule"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let day0 = Utc.from_utc_datetime(&spec.start.and_hms_opt(0, 0, 0).expect("midnight"));

    let mut snapshots = Vec::new();
    let mut tweets = Vec::new();
    for cand in &spec.candidates {
        validate_candidate(cand, rules)?;
        let marker = |topic: &str| rules.get(topic).map(|r| r.patterns[0].text.clone());
        for d in 0..spec.days {
            let frac = if spec.days > 1 { d as f64 / (spec.days - 1) as f64 } else { 0.0 };
            let count = cand.followers_start as f64 + frac * (cand.followers_end as f64 - cand.followers_start as f64);
            snapshots.push((
                cand.id.clone(),
                FollowerSnapshot {
                    at: day0 + Duration::days(d as i64) + Duration::hours(12),
                    count: count.round() as u64,
                },
            ));
        }
        let own_marker = marker(&cand.id);

        let mut serial = 0;
        for _ in 0..cand.n_tweets {
            let day = rng.random_range(0..spec.days);
            let secs = rng.random_range(0..86_400);
            let created_at: DateTime<Utc> = day0 + Duration::days(day as i64) + Duration::seconds(secs);
            let followers_millions = snapshots
                .iter()
                .rev()
                .find(|(c, s)| *c == cand.id && s.at.date_naive() == created_at.date_naive())
                .map(|(_, s)| s.count as f64 / 1e6)
                .expect("one snapshot per day");

            let mut units: Vec<String> = Vec::new();
            let mut eta = cand.intercept + cand.beta_followers * followers_millions;
            for (topic, &(prev, coef)) in &cand.topics {
                if rng.random_bool(prev) {
                    units.push(marker(topic).expect("validated"));
                    eta += coef;
                }
            }
            let self_ref = own_marker.is_some() && rng.random_bool(cand.self_reference_rate);
            if self_ref {
                units.push(own_marker.clone().expect("checked"));
                eta += cand.beta_self_reference;
            }
            let link = rng.random_bool(cand.hyperlink_rate);
            if link {
                units.push(format!("https://t.co/{:06x}", rng.random_range(0..0x100_0000u32)));
                eta += cand.beta_hyperlink;
            }
            let marker_words: usize = units.iter().map(|u| u.split_whitespace().count()).sum();
            let target = rng.random_range(cand.length_range.0..=cand.length_range.1);
            while units.iter().map(|u| u.split_whitespace().count()).sum::<usize>() < target {
                units.push(filler[rng.random_range(0..filler.len())].to_string());
            }
            let words = target.max(marker_words);
            eta += cand.beta_length * words as f64;

            let expected: std::collections::BTreeSet<String> = cand
                .topics
                .keys()
                .filter(|t| units.iter().any(|u| Some(u) == marker(t).as_ref()))
                .cloned()
                .chain(self_ref.then(|| cand.id.clone()))
                .collect();
            let mut text = String::new();
            for attempt in 0..20 {
                units.shuffle(&mut rng);
                text = units.join(" ");
                if rules.label(&text) == expected {
                    break;
                }
                if attempt == 19 {
                    return Err(invalid(format!(
                        "could not compose a tweet for {} whose labels are exactly {expected:?}",
                        cand.id
                    )));
                }
            }

            let likes = draw_count(eta.clamp(-30.0, 30.0).exp(), cand.alpha, &mut rng);
            serial += 1;
            tweets.push(Tweet {
                id: format!("{}-{serial:05}", cand.id),
                candidate: cand.id.clone(),
                created_at,
                text,
                likes,
                is_retweet: false,
            });
            if cand.retweet_rate > 0.0 && rng.random_bool(cand.retweet_rate.min(1.0)) {
                serial += 1;
                tweets.push(Tweet {
                    id: format!("{}-{serial:05}", cand.id),
                    candidate: cand.id.clone(),
                    created_at,
                    text: format!("RT {}", filler[0]),
                    likes: rng.random_range(0..1_000_000),
                    is_retweet: true,
                });
            }
        }
    }
    let followers = FollowerSeries::from_snapshots(snapshots).map_err(|e| invalid(e.to_string()))?;
    Ok(SynthCorpus { tweets, followers })
}

fn validate_candidate(cand: &CandidateSynth, rules: &RuleSet) -> Result<(), SynthError> {
    if cand.id.is_empty() {
        return Err(invalid("empty candidate id"));
    }
    if !(cand.alpha >= 0.0) {
        return Err(invalid("alpha must be >= 0"));
    }
    if cand.length_range.0 > cand.length_range.1 {
        return Err(invalid("length range is inverted"));
    }
    for (topic, &(prev, coef)) in &cand.topics {
        if rules.get(topic).is_none() {
            return Err(invalid(format!("unknown topic {topic}")));
        }
        if topic == &cand.id {
            return Err(invalid("a candidate's own name is a control, not a topic"));
        }
        if !(0.0..=1.0).contains(&prev) || !coef.is_finite() {
            return Err(invalid(format!("bad prevalence or coefficient for {topic}")));
        }
    }
    for rate in [cand.hyperlink_rate, cand.self_reference_rate, cand.retweet_rate] {
        if !(0.0..=1.0).contains(&rate) {
            return Err(invalid("rates must lie in [0, 1]"));
        }
    }
    Ok(())
}

/// Five candidates with distinct topic mixes, loosely shaped like a
/// primary-season corpus. Used by the `simulate` command.
pub fn campaign_scenario(seed: u64, tweets_per_candidate: usize) -> CorpusSpec {
    let cand = |id: &str, intercept: f64, alpha: f64, start: u64, end: u64, topics: &[(&str, f64, f64)]| CandidateSynth {
        id: id.into(),
        n_tweets: tweets_per_candidate,
        alpha,
        intercept,
        beta_followers: 0.08,
        beta_length: 0.01,
        beta_hyperlink: -0.3,
        beta_self_reference: 0.1,
        topics: topics.iter().map(|&(t, p, b)| (t.to_string(), (p, b))).collect(),
        followers_start: start,
        followers_end: end,
        length_range: (6, 24),
        hyperlink_rate: 0.4,
        self_reference_rate: 0.15,
        retweet_rate: 0.05,
    };
    CorpusSpec {
        start: NaiveDate::from_ymd_opt(2015, 9, 18).expect("valid date"),
        days: 128,
        seed,
        candidates: vec![
            cand("clinton", 6.6, 0.45, 4_800_000, 5_500_000, &[
                ("trump", 0.15, 0.4), ("obama", 0.12, 0.3), ("women", 0.12, -0.1),
                ("gun_control", 0.08, -0.15), ("economy", 0.06, -0.25), ("wall_street", 0.04, -0.5),
            ]),
            cand("sanders", 7.2, 0.5, 2_200_000, 3_300_000, &[
                ("clinton", 0.10, 0.1), ("trump", 0.06, 1.0), ("economy", 0.15, 0.1),
                ("wall_street", 0.12, -0.1), ("education", 0.08, 0.2), ("obama", 0.03, -0.2),
            ]),
            cand("trump", 7.1, 0.35, 4_500_000, 6_000_000, &[
                ("clinton", 0.08, 0.4), ("obama", 0.06, 0.3), ("bush", 0.07, -0.2),
                ("rubio", 0.05, -0.1), ("immigration", 0.08, 0.3), ("isis", 0.05, 0.3),
            ]),
            cand("cruz", 5.2, 0.6, 800_000, 1_000_000, &[
                ("obama", 0.12, -0.2), ("clinton", 0.06, 0.1), ("trump", 0.05, 0.2),
                ("isis", 0.08, 0.25), ("abortion", 0.04, 0.1), ("iran", 0.04, 0.1),
            ]),
            cand("rubio", 5.0, 0.6, 1_100_000, 1_300_000, &[
                ("obama", 0.14, -0.25), ("clinton", 0.08, 0.15), ("isis", 0.09, 0.2),
                ("abortion", 0.04, 0.5), ("iran", 0.04, 0.05), ("economy", 0.05, -0.1),
            ]),
        ],
    }
}
