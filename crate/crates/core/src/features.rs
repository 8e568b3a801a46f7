//! Per-candidate regression design matrices.
//!
//! Columns are the intercept, four controls and one binary indicator per
//! topic. The candidate's own figure topic is not a topic column: it becomes
//! the `self_reference` control instead. Any non-intercept column that is
//! constant over the candidate's tweets is pruned.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{own_tweets, CorpusError, FollowerSeries, Tweet};
use crate::labeler::{RuleSet, TopicLabels};
use crate::output::csv_bytes;

pub const INTERCEPT: &str = "intercept";
pub const FOLLOWERS: &str = "followers_millions";
pub const LENGTH: &str = "length_words";
pub const HYPERLINK: &str = "hyperlink";
pub const SELF_REFERENCE: &str = "self_reference";

/// Intercept and controls, in column order.
pub const CONTROL_COLUMNS: [&str; 5] = [INTERCEPT, FOLLOWERS, LENGTH, HYPERLINK, SELF_REFERENCE];

const LINK_MARKERS: [&str; 3] = ["http://", "https://", "t.co/"];

#[derive(Debug, Error)]
pub enum FeaturesError {
    #[error("candidate {0:?} has no non-retweet tweets")]
    EmptyMatrix(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("no labels for tweet {0:?}")]
    MissingLabels(String),
    #[error("follower count for {candidate} on {day} is not positive")]
    NonPositiveFollowers { candidate: String, day: String },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("invalid design: {0}")]
    Invalid(String),
}

impl FeaturesError {
    pub fn kind(&self) -> &'static str {
        match self {
            FeaturesError::EmptyMatrix(_) => "empty_matrix",
            FeaturesError::Corpus(e) => e.kind(),
            FeaturesError::MissingLabels(_) => "missing_labels",
            FeaturesError::NonPositiveFollowers { .. } => "validation",
            FeaturesError::UnknownColumn(_) => "unknown_column",
            FeaturesError::Invalid(_) => "validation",
        }
    }
}

/// Response and covariates for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignMatrix {
    pub candidate: String,
    pub y: Vec<u64>,
    pub column_names: Vec<String>,
    #[serde(skip)]
    pub x: DMatrix<f64>,
    /// The selectable topic columns, in column order.
    pub topic_columns: Vec<String>,
    /// Source tweet of each row, when built from a corpus.
    pub row_ids: Vec<String>,
}

impl DesignMatrix {
    pub fn new(
        candidate: impl Into<String>,
        y: Vec<u64>,
        column_names: Vec<String>,
        x: DMatrix<f64>,
        topic_columns: Vec<String>,
    ) -> Result<Self, FeaturesError> {
        if y.is_empty() {
            return Err(FeaturesError::EmptyMatrix(candidate.into()));
        }
        if x.nrows() != y.len() || x.ncols() != column_names.len() {
            return Err(FeaturesError::Invalid(format!(
                "x is {}x{}, expected {}x{}",
                x.nrows(),
                x.ncols(),
                y.len(),
                column_names.len()
            )));
        }
        let names: BTreeSet<&str> = column_names.iter().map(String::as_str).collect();
        if names.len() != column_names.len() {
            return Err(FeaturesError::Invalid("duplicate column name".into()));
        }
        if let Some(t) = topic_columns.iter().find(|t| !names.contains(t.as_str())) {
            return Err(FeaturesError::UnknownColumn(t.clone()));
        }
        let row_ids = (0..y.len()).map(|i| i.to_string()).collect();
        Ok(DesignMatrix {
            candidate: candidate.into(),
            y,
            column_names,
            x,
            topic_columns,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn is_topic(&self, name: &str) -> bool {
        self.topic_columns.iter().any(|t| t == name)
    }

    /// Non-topic columns (intercept and controls), in column order.
    pub fn control_columns(&self) -> Vec<String> {
        self.column_names
            .iter()
            .filter(|c| !self.is_topic(c))
            .cloned()
            .collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n_rows() as f64;
        self.x.column_iter().map(|c| c.sum() / n).collect()
    }

    /// A sub-design keeping `columns` in the given order.
    pub fn select(&self, columns: &[String]) -> Result<DesignMatrix, FeaturesError> {
        let idx: Vec<usize> = columns
            .iter()
            .map(|c| self.column_index(c).ok_or_else(|| FeaturesError::UnknownColumn(c.clone())))
            .collect::<Result<_, _>>()?;
        let x = self.x.select_columns(idx.iter());
        Ok(DesignMatrix {
            candidate: self.candidate.clone(),
            y: self.y.clone(),
            column_names: columns.to_vec(),
            x,
            topic_columns: columns.iter().filter(|c| self.is_topic(c)).cloned().collect(),
            row_ids: self.row_ids.clone(),
        })
    }

    /// Controls plus the given topics, in that order.
    pub fn with_topics(&self, topics: &[String]) -> Result<DesignMatrix, FeaturesError> {
        let mut cols = self.control_columns();
        cols.extend(topics.iter().cloned());
        self.select(&cols)
    }

    /// CSV dump with header `likes` followed by the column names.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut header = vec!["likes"];
        header.extend(self.column_names.iter().map(String::as_str));
        let rows = (0..self.n_rows()).map(|i| {
            std::iter::once(self.y[i].to_string())
                .chain(self.x.row(i).iter().map(|v| v.to_string()))
                .collect::<Vec<_>>()
        });
        csv_bytes(&header, rows).expect("in-memory csv")
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn has_hyperlink(text: &str) -> bool {
    LINK_MARKERS.iter().any(|m| text.contains(m))
}

/// Topic columns considered for `candidate` before pruning: every figure but
/// the candidate's own, then every issue.
pub fn candidate_topic_universe(rules: &RuleSet, candidate: &str) -> Vec<String> {
    rules
        .figures()
        .filter(|r| r.topic_id != candidate)
        .chain(rules.issues())
        .map(|r| r.topic_id.clone())
        .collect()
}

/// Builds the design for `candidate` from its non-retweet tweets.
pub fn build_design_matrix(
    tweets: &[Tweet],
    labels: &[TopicLabels],
    series: &FollowerSeries,
    candidate: &str,
    rules: &RuleSet,
) -> Result<DesignMatrix, FeaturesError> {
    let rows: Vec<&Tweet> = own_tweets(tweets, candidate).collect();
    if rows.is_empty() {
        return Err(FeaturesError::EmptyMatrix(candidate.to_string()));
    }
    let by_id: HashMap<&str, &BTreeSet<String>> =
        labels.iter().map(|l| (l.tweet_id.as_str(), &l.topics)).collect();

    let own_rule = rules.figures().find(|r| r.topic_id == candidate);
    if own_rule.is_none() {
        log::warn!("candidate {candidate} has no figure rule; self_reference will be all zero");
    }
    let topics = candidate_topic_universe(rules, candidate);
    let mut names: Vec<String> = CONTROL_COLUMNS.iter().map(|s| s.to_string()).collect();
    names.extend(topics.iter().cloned());

    let mut data = Vec::with_capacity(rows.len() * names.len());
    let mut y = Vec::with_capacity(rows.len());
    let mut row_ids = Vec::with_capacity(rows.len());
    for t in &rows {
        let topics_of = by_id
            .get(t.id.as_str())
            .ok_or_else(|| FeaturesError::MissingLabels(t.id.clone()))?;
        let followers = series.millions_on_day(candidate, t.day())?;
        if followers <= 0.0 {
            return Err(FeaturesError::NonPositiveFollowers {
                candidate: candidate.to_string(),
                day: t.day().to_string(),
            });
        }
        let self_ref = own_rule.is_some_and(|r| rules.matches(r, &t.text));
        data.extend([
            1.0,
            followers,
            word_count(&t.text) as f64,
            indicator(has_hyperlink(&t.text)),
            indicator(self_ref),
        ]);
        data.extend(topics.iter().map(|topic| indicator(topics_of.contains(topic))));
        y.push(t.likes);
        row_ids.push(t.id.clone());
    }
    let x = DMatrix::from_row_slice(rows.len(), names.len(), &data);

    let keep: Vec<usize> = (0..names.len())
        .filter(|&j| {
            if names[j] == INTERCEPT {
                return true;
            }
            let col = x.column(j);
            let constant = col.iter().all(|&v| v == col[0]);
            if constant {
                log::info!(
                    "candidate {candidate}: dropping constant column {} (value {})",
                    names[j],
                    col[0]
                );
            }
            !constant
        })
        .collect();
    let x = x.select_columns(keep.iter());
    let column_names: Vec<String> = keep.iter().map(|&j| names[j].clone()).collect();
    let topic_columns = column_names
        .iter()
        .filter(|c| topics.contains(c))
        .cloned()
        .collect();
    Ok(DesignMatrix {
        candidate: candidate.to_string(),
        y,
        column_names,
        x,
        topic_columns,
        row_ids,
    })
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}
