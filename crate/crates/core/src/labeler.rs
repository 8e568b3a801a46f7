//! Keyword topic labeling.
//!
//! A tweet carries a topic iff any of the topic's patterns occurs in its
//! text. Figure patterns match with their own case sensitivity. Issue
//! patterns always match against case-folded text. Matching is plain
//! substring containment unless the rule file turns on `word_boundary`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Tweet;

const DEFAULT_RULES: &str = include_str!("../data/default_rules.json");

#[derive(Debug, Error)]
pub enum LabelerError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("rule file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate topic id {0:?}")]
    DuplicateTopic(String),
    #[error("topic {0:?} has no patterns")]
    NoPatterns(String),
    #[error("topic {0:?} has an empty pattern")]
    EmptyPattern(String),
}

impl LabelerError {
    pub fn kind(&self) -> &'static str {
        match self {
            LabelerError::Io { .. } => "io",
            LabelerError::Parse(_) => "config",
            LabelerError::DuplicateTopic(_) => "duplicate_topic",
            LabelerError::NoPatterns(_) | LabelerError::EmptyPattern(_) => "empty_pattern",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicKind {
    Figure,
    Issue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    /// Stored case-folded when `case_sensitive` is false.
    pub text: String,
    pub case_sensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicRule {
    pub topic_id: String,
    pub kind: TopicKind,
    pub patterns: Vec<Pattern>,
}

/// Validated, immutable rule set. Figures come first, then issues, each
/// group sorted by topic id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<TopicRule>,
    word_boundary: bool,
}

// ---- rule file schema ----

#[derive(Deserialize)]
#[serde(untagged)]
enum RawPattern {
    Text(String),
    Detailed {
        pattern: String,
        case_sensitive: Option<bool>,
    },
}

#[derive(Deserialize)]
struct RawFigure {
    patterns: Vec<RawPattern>,
    #[serde(default)]
    case_sensitive: bool,
}

#[derive(Deserialize)]
struct RawIssue {
    patterns: Vec<String>,
}

#[derive(Deserialize)]
struct RawRuleFile {
    #[serde(default, deserialize_with = "ordered_entries")]
    figures: Vec<(String, RawFigure)>,
    #[serde(default, deserialize_with = "ordered_entries")]
    issues: Vec<(String, RawIssue)>,
    #[serde(default)]
    word_boundary: bool,
}

/// Keeps every key of a JSON object, so duplicated keys can be reported
/// instead of silently overwritten.
fn ordered_entries<'de, D, V>(d: D) -> Result<Vec<(String, V)>, D::Error>
where
    D: Deserializer<'de>,
    V: Deserialize<'de>,
{
    struct Entries<V>(std::marker::PhantomData<V>);
    impl<'de, V: Deserialize<'de>> Visitor<'de> for Entries<V> {
        type Value = Vec<(String, V)>;
        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("an object of topic rules")
        }
        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some(entry) = map.next_entry::<String, V>()? {
                out.push(entry);
            }
            Ok(out)
        }
    }
    d.deserialize_map(Entries(std::marker::PhantomData))
        .map_err(de::Error::custom)
}

/// Unicode full case folding.
pub fn fold(text: &str) -> String {
    caseless::default_case_fold_str(text)
}

impl RuleSet {
    /// The shipped rule file: 12 political figures and 10 issues.
    pub fn default_rules() -> Self {
        Self::from_json(DEFAULT_RULES).expect("shipped rule file is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LabelerError> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|source| LabelerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&raw)
    }

    pub fn from_json(raw: &str) -> Result<Self, LabelerError> {
        let file: RawRuleFile = serde_json::from_str(raw)?;
        let mut rules = Vec::new();
        for (id, fig) in file.figures {
            let patterns = fig
                .patterns
                .into_iter()
                .map(|p| match p {
                    RawPattern::Text(text) => (text, fig.case_sensitive),
                    RawPattern::Detailed {
                        pattern,
                        case_sensitive,
                    } => (pattern, case_sensitive.unwrap_or(fig.case_sensitive)),
                })
                .collect();
            rules.push(Self::rule(id, TopicKind::Figure, patterns)?);
        }
        for (id, issue) in file.issues {
            let patterns = issue.patterns.into_iter().map(|p| (p, false)).collect();
            rules.push(Self::rule(id, TopicKind::Issue, patterns)?);
        }
        Self::new(rules, file.word_boundary)
    }

    fn rule(
        topic_id: String,
        kind: TopicKind,
        patterns: Vec<(String, bool)>,
    ) -> Result<TopicRule, LabelerError> {
        let patterns = patterns
            .into_iter()
            .map(|(text, case_sensitive)| Pattern {
                text: if case_sensitive { text } else { fold(&text) },
                case_sensitive,
            })
            .collect();
        Ok(TopicRule {
            topic_id,
            kind,
            patterns,
        })
    }

    pub fn new(mut rules: Vec<TopicRule>, word_boundary: bool) -> Result<Self, LabelerError> {
        let mut seen = BTreeSet::new();
        for rule in &rules {
            if !seen.insert(rule.topic_id.as_str()) {
                return Err(LabelerError::DuplicateTopic(rule.topic_id.clone()));
            }
            if rule.patterns.is_empty() {
                return Err(LabelerError::NoPatterns(rule.topic_id.clone()));
            }
            if rule.patterns.iter().any(|p| p.text.is_empty()) {
                return Err(LabelerError::EmptyPattern(rule.topic_id.clone()));
            }
        }
        rules.sort_by(|a, b| (a.kind, &a.topic_id).cmp(&(b.kind, &b.topic_id)));
        Ok(RuleSet {
            rules,
            word_boundary,
        })
    }

    pub fn rules(&self) -> &[TopicRule] {
        &self.rules
    }

    pub fn get(&self, topic_id: &str) -> Option<&TopicRule> {
        self.rules.iter().find(|r| r.topic_id == topic_id)
    }

    pub fn figures(&self) -> impl Iterator<Item = &TopicRule> {
        self.rules.iter().filter(|r| r.kind == TopicKind::Figure)
    }

    pub fn issues(&self) -> impl Iterator<Item = &TopicRule> {
        self.rules.iter().filter(|r| r.kind == TopicKind::Issue)
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.topic_id.as_str())
    }

    pub fn word_boundary(&self) -> bool {
        self.word_boundary
    }

    /// Topics whose patterns occur in `text`.
    pub fn label(&self, text: &str) -> BTreeSet<String> {
        let folded = fold(text);
        self.rules
            .iter()
            .filter(|rule| self.rule_matches(rule, text, &folded))
            .map(|rule| rule.topic_id.clone())
            .collect()
    }

    /// Whether a single rule fires on `text`.
    pub fn matches(&self, rule: &TopicRule, text: &str) -> bool {
        self.rule_matches(rule, text, &fold(text))
    }

    fn rule_matches(&self, rule: &TopicRule, raw: &str, folded: &str) -> bool {
        rule.patterns.iter().any(|p| {
            let hay = if p.case_sensitive { raw } else { folded };
            if self.word_boundary {
                contains_word(hay, &p.text)
            } else {
                hay.contains(p.text.as_str())
            }
        })
    }
}

fn contains_word(hay: &str, needle: &str) -> bool {
    hay.match_indices(needle).any(|(i, m)| {
        let before = hay[..i].chars().next_back();
        let after = hay[i + m.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

pub fn label_tweet(text: &str, rules: &RuleSet) -> BTreeSet<String> {
    rules.label(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicLabels {
    pub tweet_id: String,
    pub topics: BTreeSet<String>,
}

/// Labels every tweet, in input order.
pub fn label_corpus(tweets: &[Tweet], rules: &RuleSet) -> Vec<TopicLabels> {
    tweets
        .par_iter()
        .map(|t| TopicLabels {
            tweet_id: t.id.clone(),
            topics: rules.label(&t.text),
        })
        .collect()
}

/// Number of labeled tweets carrying each topic of the rule set. A
/// multi-labeled tweet counts once for each of its topics.
pub fn topic_frequencies<'a, I>(labels: I, rules: &RuleSet) -> BTreeMap<String, usize>
where
    I: IntoIterator<Item = &'a TopicLabels>,
{
    let mut counts: BTreeMap<String, usize> = rules.topic_ids().map(|id| (id.to_string(), 0)).collect();
    for l in labels {
        for topic in &l.topics {
            if let Some(c) = counts.get_mut(topic) {
                *c += 1;
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn default_rules_have_twelve_figures_and_ten_issues() {
        let rules = RuleSet::default_rules();
        assert_eq!(rules.figures().count(), 12);
        assert_eq!(rules.issues().count(), 10);
    }

    #[test]
    fn duplicate_topic_rejected() {
        let raw = r#"{"figures": {"obama": {"patterns": ["Obama"]}, "obama": {"patterns": ["Barack"]}}}"#;
        assert!(matches!(
            RuleSet::from_json(raw).unwrap_err(),
            LabelerError::DuplicateTopic(id) if id == "obama"
        ));
        let across = r#"{"figures": {"iran": {"patterns": ["Iran"]}}, "issues": {"iran": {"patterns": ["iran"]}}}"#;
        assert!(matches!(
            RuleSet::from_json(across).unwrap_err(),
            LabelerError::DuplicateTopic(_)
        ));
    }

    #[test]
    fn empty_patterns_rejected() {
        let none = r#"{"issues": {"iran": {"patterns": []}}}"#;
        assert!(matches!(RuleSet::from_json(none).unwrap_err(), LabelerError::NoPatterns(_)));
        let blank = r#"{"issues": {"iran": {"patterns": [""]}}}"#;
        assert!(matches!(RuleSet::from_json(blank).unwrap_err(), LabelerError::EmptyPattern(_)));
    }

    #[test]
    fn per_pattern_case_sensitivity() {
        let raw = r#"{"figures": {"rubio": {"patterns": [{"pattern": "marcorubio", "case_sensitive": true}, "rubio"]}}}"#;
        let rules = RuleSet::from_json(raw).unwrap();
        assert_eq!(rules.label("RUBIO"), set(&["rubio"]));
        assert_eq!(rules.label("MarcoRubio"), set(&["rubio"]));
        let strict = r#"{"figures": {"rubio": {"patterns": [{"pattern": "marcorubio", "case_sensitive": true}]}}}"#;
        assert!(RuleSet::from_json(strict).unwrap().label("MARCORUBIO").is_empty());
    }

    #[test]
    fn word_boundary_mode() {
        let raw = r#"{"word_boundary": true, "issues": {"gun_control": {"patterns": ["gun"]}}}"#;
        let rules = RuleSet::from_json(raw).unwrap();
        assert!(rules.label("we have begun").is_empty());
        assert_eq!(rules.label("the gun show"), set(&["gun_control"]));
        assert_eq!(rules.label("gun!"), set(&["gun_control"]));
        assert!(RuleSet::default_rules().label("we have begun").contains("gun_control"));
    }

    #[test]
    fn case_folding_is_full_unicode() {
        let raw = r#"{"issues": {"strasse": {"patterns": ["STRASSE"]}}}"#;
        let rules = RuleSet::from_json(raw).unwrap();
        assert_eq!(rules.label("Hauptstraße"), set(&["strasse"]));
    }

    #[test]
    fn frequencies_count_multilabels_once_per_topic() {
        let rules = RuleSet::from_json(
            r#"{"issues": {"a": {"patterns": ["alpha"]}, "b": {"patterns": ["beta"]}}}"#,
        )
        .unwrap();
        let labels: Vec<TopicLabels> = ["alpha", "alpha beta", "nothing"]
            .iter()
            .enumerate()
            .map(|(i, t)| TopicLabels {
                tweet_id: i.to_string(),
                topics: rules.label(t),
            })
            .collect();
        let f = topic_frequencies(&labels, &rules);
        assert_eq!(f["a"], 2);
        assert_eq!(f["b"], 1);
        let empty = topic_frequencies(&[], &rules);
        assert!(empty.values().all(|&c| c == 0));
        assert_eq!(empty.len(), 2);
    }
}
