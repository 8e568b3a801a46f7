//! Tweet and follower-series ingestion.
//!
//! Tweets arrive as JSON lines with exactly the fields
//! `id, candidate, created_at, text, likes, is_retweet`. Follower snapshots
//! arrive as CSV with header `candidate,at,count`. Timestamps are RFC 3339
//! and are truncated to whole seconds on ingestion; calendar days are UTC.
//!
//! Retweets are kept in memory with their flag set. Every statistic in this
//! crate skips them because a retweet carries no like count of its own.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, SecondsFormat, TimeZone, Timelike, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::output::{csv_bytes, write_atomic};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: schema error: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: invalid value: {message}")]
    Validation { line: usize, message: String },
    #[error("follower file: {0}")]
    FollowerFile(String),
    #[error("no non-retweet tweets for candidate {0:?}")]
    EmptyGroup(String),
    #[error("no follower snapshots for candidate {0:?}")]
    MissingSeries(String),
}

impl CorpusError {
    pub fn kind(&self) -> &'static str {
        match self {
            CorpusError::Io { .. } => "io",
            CorpusError::Parse { .. } => "parse",
            CorpusError::Schema { .. } => "schema",
            CorpusError::Validation { .. } => "validation",
            CorpusError::FollowerFile(_) => "follower_file",
            CorpusError::EmptyGroup(_) => "empty_group",
            CorpusError::MissingSeries(_) => "missing_series",
        }
    }
}

/// One post by a candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub candidate: String,
    #[serde(with = "rfc3339_secs")]
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub likes: u64,
    pub is_retweet: bool,
}

impl Tweet {
    pub fn day(&self) -> NaiveDate {
        self.created_at.date_naive()
    }
}

mod rfc3339_secs {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(at: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&at.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_timestamp(&raw).map_err(serde::de::Error::custom)
    }
}

fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, String> {
    let at = DateTime::parse_from_rfc3339(raw)
        .map_err(|e| format!("bad RFC 3339 timestamp {raw:?}: {e}"))?
        .with_timezone(&Utc);
    Ok(at.with_nanosecond(0).unwrap_or(at))
}

const TWEET_FIELDS: [&str; 6] = ["id", "candidate", "created_at", "text", "likes", "is_retweet"];

/// Reads a JSON-lines tweet file. Blank lines are skipped; line numbers in
/// errors are 1-based and count blank lines.
pub fn parse_tweets(path: impl AsRef<Path>) -> Result<Vec<Tweet>, CorpusError> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tweets_str(&raw)
}

pub fn parse_tweets_str(raw: &str) -> Result<Vec<Tweet>, CorpusError> {
    let mut tweets = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(CorpusError::Schema {
                line: line_no,
                message: "expected a JSON object".into(),
            });
        };
        tweets.push(tweet_from_object(&obj, line_no)?);
    }
    Ok(tweets)
}

fn tweet_from_object(obj: &Map<String, Value>, line: usize) -> Result<Tweet, CorpusError> {
    let schema = |message: String| CorpusError::Schema { line, message };
    let invalid = |message: String| CorpusError::Validation { line, message };

    if let Some(extra) = obj.keys().find(|k| !TWEET_FIELDS.contains(&k.as_str())) {
        return Err(schema(format!("unexpected field {extra:?}")));
    }
    let field = |name: &str| obj.get(name).ok_or_else(|| schema(format!("missing field {name:?}")));
    let string = |name: &str| -> Result<String, CorpusError> {
        field(name)?
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| schema(format!("field {name:?} must be a string")))
    };

    let id = string("id")?;
    let candidate = string("candidate")?;
    if candidate.is_empty() {
        return Err(invalid("candidate must be non-empty".into()));
    }
    let created_at = parse_timestamp(&string("created_at")?).map_err(invalid)?;
    let text = string("text")?;
    let likes = match field("likes")? {
        Value::Number(n) => {
            if let Some(v) = n.as_u64() {
                v
            } else if n.as_i64().is_some() {
                return Err(invalid(format!("likes must be >= 0, got {n}")));
            } else {
                return Err(invalid(format!("likes must be an integer count, got {n}")));
            }
        }
        _ => return Err(schema("field \"likes\" must be an integer".into())),
    };
    let is_retweet = field("is_retweet")?
        .as_bool()
        .ok_or_else(|| schema("field \"is_retweet\" must be a boolean".into()))?;

    Ok(Tweet {
        id,
        candidate,
        created_at,
        text,
        likes,
        is_retweet,
    })
}

/// Serializes tweets as JSON lines, one object per line, field order fixed.
pub fn tweets_to_jsonl(tweets: &[Tweet]) -> String {
    let mut out = String::new();
    for t in tweets {
        // serde_json cannot fail on this struct
        out.push_str(&serde_json::to_string(t).expect("tweet serializes"));
        out.push('\n');
    }
    out
}

/// Sorted, de-duplicated candidate ids present in the corpus.
pub fn candidates(tweets: &[Tweet]) -> Vec<String> {
    let mut ids: Vec<String> = tweets.iter().map(|t| t.candidate.clone()).collect();
    ids.sort();
    ids.dedup();
    ids
}

/// The candidate's tweets that count towards statistics (retweets excluded).
pub fn own_tweets<'a>(tweets: &'a [Tweet], candidate: &'a str) -> impl Iterator<Item = &'a Tweet> + 'a {
    tweets
        .iter()
        .filter(move |t| t.candidate == candidate && !t.is_retweet)
}

/// Table-1 style summary of a candidate's like counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikesSummary {
    pub candidate: String,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when `n == 1`.
    pub sd: f64,
    pub min: u64,
    pub max: u64,
    pub n: usize,
}

pub fn summarize_likes(tweets: &[Tweet], candidate: &str) -> Result<LikesSummary, CorpusError> {
    let likes: Vec<u64> = own_tweets(tweets, candidate).map(|t| t.likes).collect();
    if likes.is_empty() {
        return Err(CorpusError::EmptyGroup(candidate.to_string()));
    }
    let n = likes.len();
    let mean = likes.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let sd = if n == 1 {
        log::warn!("candidate {candidate}: single tweet, standard deviation reported as 0");
        0.0
    } else {
        let ss: f64 = likes.iter().map(|&v| (v as f64 - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Ok(LikesSummary {
        candidate: candidate.to_string(),
        mean,
        sd,
        min: *likes.iter().min().unwrap(),
        max: *likes.iter().max().unwrap(),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowerSnapshot {
    pub at: DateTime<Utc>,
    /// Raw follower count.
    pub count: u64,
}

/// Per-candidate follower snapshots, sorted by time with no duplicate
/// timestamps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FollowerSeries {
    series: BTreeMap<String, Vec<FollowerSnapshot>>,
}

#[derive(Debug, Deserialize)]
struct FollowerRow {
    candidate: String,
    at: String,
    count: i64,
}

impl FollowerSeries {
    pub fn from_snapshots<I>(snapshots: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (String, FollowerSnapshot)>,
    {
        let mut series: BTreeMap<String, Vec<FollowerSnapshot>> = BTreeMap::new();
        for (candidate, snap) in snapshots {
            if candidate.is_empty() {
                return Err(CorpusError::FollowerFile("empty candidate id".into()));
            }
            series.entry(candidate).or_default().push(snap);
        }
        for (candidate, snaps) in series.iter_mut() {
            snaps.sort_by_key(|s| s.at);
            if let Some(w) = snaps.windows(2).find(|w| w[0].at == w[1].at) {
                return Err(CorpusError::FollowerFile(format!(
                    "duplicate snapshot for {candidate} at {}",
                    w[0].at.to_rfc3339_opts(SecondsFormat::Secs, true)
                )));
            }
        }
        Ok(FollowerSeries { series })
    }

    pub fn parse(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let raw = fs::read(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_csv(&raw)
    }

    pub fn parse_csv(raw: &[u8]) -> Result<Self, CorpusError> {
        let mut reader = csv::Reader::from_reader(raw);
        let headers = reader
            .headers()
            .map_err(|e| CorpusError::FollowerFile(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["candidate", "at", "count"] {
            return Err(CorpusError::FollowerFile(format!(
                "expected header candidate,at,count, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut snaps = Vec::new();
        for (idx, row) in reader.deserialize::<FollowerRow>().enumerate() {
            let line = idx + 2;
            let row = row.map_err(|e| CorpusError::FollowerFile(format!("line {line}: {e}")))?;
            let at = parse_timestamp(&row.at)
                .map_err(|e| CorpusError::FollowerFile(format!("line {line}: {e}")))?;
            if row.count < 0 {
                return Err(CorpusError::FollowerFile(format!(
                    "line {line}: count must be >= 0, got {}",
                    row.count
                )));
            }
            snaps.push((row.candidate, FollowerSnapshot { at, count: row.count as u64 }));
        }
        Self::from_snapshots(snaps)
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let rows = self.series.iter().flat_map(|(c, snaps)| {
            snaps.iter().map(move |s| {
                vec![
                    c.clone(),
                    s.at.to_rfc3339_opts(SecondsFormat::Secs, true),
                    s.count.to_string(),
                ]
            })
        });
        csv_bytes(&["candidate", "at", "count"], rows).expect("in-memory csv")
    }

    pub fn snapshots(&self, candidate: &str) -> Option<&[FollowerSnapshot]> {
        self.series.get(candidate).map(Vec::as_slice)
    }

    pub fn candidates(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    /// Follower count in millions for the UTC calendar `day`.
    ///
    /// Snapshots taken on `day` are averaged. With none, the value is linearly
    /// interpolated at noon UTC between the nearest snapshots on either side;
    /// outside the observed range the nearest snapshot is used as is.
    pub fn millions_on_day(&self, candidate: &str, day: NaiveDate) -> Result<f64, CorpusError> {
        let snaps = self
            .snapshots(candidate)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CorpusError::MissingSeries(candidate.to_string()))?;

        let start = Utc.from_utc_datetime(&day.and_hms_opt(0, 0, 0).unwrap());
        let end = start + Duration::days(1);
        let lo = snaps.partition_point(|s| s.at < start);
        let hi = snaps.partition_point(|s| s.at < end);
        if hi > lo {
            let sum: f64 = snaps[lo..hi].iter().map(|s| s.count as f64).sum();
            return Ok(sum / (hi - lo) as f64 / 1e6);
        }
        // no snapshot on the day: lo == hi is the index of the first snapshot after it
        let count = if lo == 0 {
            snaps[0].count as f64
        } else if lo == snaps.len() {
            snaps[snaps.len() - 1].count as f64
        } else {
            let (before, after) = (snaps[lo - 1], snaps[lo]);
            let noon = start + Duration::hours(12);
            let span = (after.at - before.at).num_seconds() as f64;
            let w = (noon - before.at).num_seconds() as f64 / span;
            before.count as f64 + w * (after.count as f64 - before.count as f64)
        };
        Ok(count / 1e6)
    }

    /// One value per UTC day from the candidate's first to last snapshot.
    pub fn daily_millions(&self, candidate: &str) -> Result<Vec<(NaiveDate, f64)>, CorpusError> {
        let snaps = self
            .snapshots(candidate)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CorpusError::MissingSeries(candidate.to_string()))?;
        let first = snaps[0].at.date_naive();
        let last = snaps[snaps.len() - 1].at.date_naive();
        first
            .iter_days()
            .take_while(|d| *d <= last)
            .map(|d| Ok((d, self.millions_on_day(candidate, d)?)))
            .collect()
    }
}

/// Free-function form of [`FollowerSeries::millions_on_day`].
pub fn follower_millions_on_day(
    series: &FollowerSeries,
    candidate: &str,
    day: NaiveDate,
) -> Result<f64, CorpusError> {
    series.millions_on_day(candidate, day)
}

/// Natural log of each non-retweet like count. Zero-like tweets have no log
/// and are dropped; the number dropped is returned alongside.
pub fn log_likes(tweets: &[Tweet], candidate: &str) -> (Vec<f64>, usize) {
    let mut dropped = 0;
    let mut values = Vec::new();
    for t in own_tweets(tweets, candidate) {
        if t.likes == 0 {
            dropped += 1;
        } else {
            values.push((t.likes as f64).ln());
        }
    }
    (values, dropped)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

/// Linear-interpolation quantile (the "type 7" definition) of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Freedman–Diaconis bin width `2 IQR n^(-1/3)`, or `None` when it is not
/// positive.
pub fn freedman_diaconis_width(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let w = 2.0 * iqr / (values.len() as f64).cbrt();
    (w > 0.0 && w.is_finite()).then_some(w)
}

/// Histogram with Freedman–Diaconis bins anchored at the minimum.
///
/// Bins are half-open `[low, high)` except the last, which also holds the
/// maximum. When the width is degenerate (fewer than two values or zero
/// IQR) all values go into one bin `[min, max]`, widened to `[min, min + 1]`
/// if every value is equal.
pub fn fd_histogram(values: &[f64]) -> Vec<HistBin> {
    if values.is_empty() {
        return Vec::new();
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let Some(width) = freedman_diaconis_width(values) else {
        let high = if max > min { max } else { min + 1.0 };
        return vec![HistBin {
            low: min,
            high,
            count: values.len(),
        }];
    };
    let n_bins = (((max - min) / width).ceil() as usize).max(1);
    let mut bins: Vec<HistBin> = (0..n_bins)
        .map(|i| HistBin {
            low: min + i as f64 * width,
            high: min + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in values {
        let i = (((v - min) / width).floor() as usize).min(n_bins - 1);
        bins[i].count += 1;
    }
    bins
}

/// Counts of what [`emit_plot_data`] wrote.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlotDataSummary {
    pub log_like_rows: usize,
    pub dropped_zero_likes: BTreeMap<String, usize>,
    pub histogram_bins: usize,
    pub follower_rows: usize,
}

/// Writes `log_likes.csv` (candidate,log_likes), `log_likes_hist.csv`
/// (candidate,bin_low,bin_high,count) and `followers_daily.csv`
/// (candidate,date,followers; followers in millions) into `out_dir`.
pub fn emit_plot_data(
    tweets: &[Tweet],
    series: &FollowerSeries,
    out_dir: &Path,
) -> Result<PlotDataSummary, CorpusError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| CorpusError::Io { path, source }
    };
    let mut summary = PlotDataSummary::default();
    let mut log_rows = Vec::new();
    let mut hist_rows = Vec::new();
    for candidate in candidates(tweets) {
        let (values, dropped) = log_likes(tweets, &candidate);
        if dropped > 0 {
            log::info!("candidate {candidate}: dropped {dropped} zero-like tweets from log data");
        }
        summary.dropped_zero_likes.insert(candidate.clone(), dropped);
        for v in &values {
            log_rows.push(vec![candidate.clone(), v.to_string()]);
        }
        for bin in fd_histogram(&values) {
            hist_rows.push(vec![
                candidate.clone(),
                bin.low.to_string(),
                bin.high.to_string(),
                bin.count.to_string(),
            ]);
        }
    }
    let mut follower_rows = Vec::new();
    for candidate in series.candidates() {
        for (day, millions) in series.daily_millions(candidate)? {
            follower_rows.push(vec![candidate.to_string(), day.to_string(), millions.to_string()]);
        }
    }
    summary.log_like_rows = log_rows.len();
    summary.histogram_bins = hist_rows.len();
    summary.follower_rows = follower_rows.len();

    let files = [
        ("log_likes.csv", vec!["candidate", "log_likes"], log_rows),
        (
            "log_likes_hist.csv",
            vec!["candidate", "bin_low", "bin_high", "count"],
            hist_rows,
        ),
        ("followers_daily.csv", vec!["candidate", "date", "followers"], follower_rows),
    ];
    for (name, header, rows) in files {
        let path = out_dir.join(name);
        let bytes = csv_bytes(&header, rows).map_err(io_err(&path))?;
        write_atomic(&path, &bytes).map_err(io_err(&path))?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str) -> DateTime<Utc> {
        parse_timestamp(s).unwrap()
    }

    fn tweet(id: &str, candidate: &str, likes: u64, is_retweet: bool) -> Tweet {
        Tweet {
            id: id.into(),
            candidate: candidate.into(),
            created_at: at("2015-10-01T10:00:00Z"),
            text: "hello".into(),
            likes,
            is_retweet,
        }
    }

    #[test]
    fn parses_a_single_line() {
        let line = r#"{"id":"1","candidate":"trump","created_at":"2015-09-18T12:00:00Z","text":"Make America","likes":730,"is_retweet":false}"#;
        let tweets = parse_tweets_str(line).unwrap();
        assert_eq!(tweets.len(), 1);
        assert_eq!(tweets[0].likes, 730);
        assert_eq!(tweets[0].candidate, "trump");
        assert!(!tweets[0].is_retweet);
        assert_eq!(tweets[0].created_at, at("2015-09-18T12:00:00Z"));
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        assert!(parse_tweets_str("").unwrap().is_empty());
        assert!(parse_tweets_str("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn negative_likes_is_a_validation_error() {
        let line = r#"{"id":"1","candidate":"trump","created_at":"2015-09-18T12:00:00Z","text":"x","likes":-1,"is_retweet":false}"#;
        let err = parse_tweets_str(line).unwrap_err();
        assert!(matches!(err, CorpusError::Validation { line: 1, .. }), "{err}");
    }

    #[test]
    fn fractional_likes_rejected() {
        let line = r#"{"id":"1","candidate":"trump","created_at":"2015-09-18T12:00:00Z","text":"x","likes":2.5,"is_retweet":false}"#;
        assert!(matches!(
            parse_tweets_str(line).unwrap_err(),
            CorpusError::Validation { .. }
        ));
    }

    #[test]
    fn malformed_line_cites_line_number() {
        let good = r#"{"id":"1","candidate":"a","created_at":"2015-09-18T12:00:00Z","text":"x","likes":1,"is_retweet":false}"#;
        let raw = format!("{good}\n{{not json\n");
        match parse_tweets_str(&raw).unwrap_err() {
            CorpusError::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_field_is_schema_error() {
        let line = r#"{"id":"1","candidate":"a","created_at":"2015-09-18T12:00:00Z","likes":1,"is_retweet":false}"#;
        match parse_tweets_str(line).unwrap_err() {
            CorpusError::Schema { message, .. } => assert!(message.contains("text")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_candidate_and_bad_timestamp_rejected() {
        let a = r#"{"id":"1","candidate":"","created_at":"2015-09-18T12:00:00Z","text":"x","likes":1,"is_retweet":false}"#;
        let b = r#"{"id":"1","candidate":"c","created_at":"yesterday","text":"x","likes":1,"is_retweet":false}"#;
        assert!(matches!(parse_tweets_str(a).unwrap_err(), CorpusError::Validation { .. }));
        assert!(matches!(parse_tweets_str(b).unwrap_err(), CorpusError::Validation { .. }));
    }

    #[test]
    fn summary_of_one_two_three() {
        let tweets: Vec<Tweet> = [1, 2, 3]
            .iter()
            .enumerate()
            .map(|(i, &l)| tweet(&i.to_string(), "c", l, false))
            .collect();
        let s = summarize_likes(&tweets, "c").unwrap();
        assert_eq!((s.mean, s.sd, s.min, s.max, s.n), (2.0, 1.0, 1, 3, 3));
    }

    #[test]
    fn single_tweet_has_zero_sd() {
        let s = summarize_likes(&[tweet("1", "clinton", 120, false)], "clinton").unwrap();
        assert_eq!((s.mean, s.sd, s.min, s.max, s.n), (120.0, 0.0, 120, 120, 1));
    }

    #[test]
    fn retweets_do_not_count() {
        let mut tweets = vec![tweet("1", "c", 10, false), tweet("2", "c", 20, false)];
        let before = summarize_likes(&tweets, "c").unwrap();
        tweets.push(tweet("3", "c", 10_000_000, true));
        assert_eq!(summarize_likes(&tweets, "c").unwrap(), before);
        let only_rt = vec![tweet("1", "d", 5, true)];
        assert!(matches!(
            summarize_likes(&only_rt, "d").unwrap_err(),
            CorpusError::EmptyGroup(_)
        ));
    }

    fn series(rows: &[(&str, &str, u64)]) -> FollowerSeries {
        FollowerSeries::from_snapshots(rows.iter().map(|(c, a, n)| {
            (c.to_string(), FollowerSnapshot { at: at(a), count: *n })
        }))
        .unwrap()
    }

    #[test]
    fn same_day_snapshots_are_averaged() {
        let s = series(&[
            ("c", "2015-10-01T01:00:00Z", 8_000_000),
            ("c", "2015-10-01T23:00:00Z", 8_200_000),
        ]);
        let v = s.millions_on_day("c", NaiveDate::from_ymd_opt(2015, 10, 1).unwrap()).unwrap();
        assert!((v - 8.1).abs() < 1e-12);
    }

    #[test]
    fn single_snapshot_used_everywhere() {
        let s = series(&[("c", "2015-10-05T08:00:00Z", 5_000_000)]);
        for d in [(2015, 1, 1), (2015, 10, 5), (2016, 6, 1)] {
            let day = NaiveDate::from_ymd_opt(d.0, d.1, d.2).unwrap();
            assert_eq!(s.millions_on_day("c", day).unwrap(), 5.0);
        }
    }

    #[test]
    fn gap_day_is_interpolated_at_noon() {
        let s = series(&[
            ("c", "2015-10-01T12:00:00Z", 1_000_000),
            ("c", "2015-10-03T12:00:00Z", 3_000_000),
        ]);
        let v = s.millions_on_day("c", NaiveDate::from_ymd_opt(2015, 10, 2).unwrap()).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn missing_series_is_an_error() {
        let s = series(&[("c", "2015-10-01T12:00:00Z", 1)]);
        let day = NaiveDate::from_ymd_opt(2015, 10, 2).unwrap();
        assert!(matches!(
            s.millions_on_day("x", day).unwrap_err(),
            CorpusError::MissingSeries(_)
        ));
    }

    #[test]
    fn follower_csv_validation() {
        assert!(FollowerSeries::parse_csv(b"candidate,at,count\nc,2015-10-01T00:00:00Z,-5\n").is_err());
        assert!(FollowerSeries::parse_csv(b"who,when,count\nc,2015-10-01T00:00:00Z,5\n").is_err());
        assert!(FollowerSeries::parse_csv(
            b"candidate,at,count\nc,2015-10-01T00:00:00Z,5\nc,2015-10-01T00:00:00Z,6\n"
        )
        .is_err());
        let s = FollowerSeries::parse_csv(
            b"candidate,at,count\nc,2015-10-02T00:00:00Z,6\nc,2015-10-01T00:00:00Z,5\n",
        )
        .unwrap();
        let snaps = s.snapshots("c").unwrap();
        assert!(snaps[0].at < snaps[1].at);
        assert_eq!(FollowerSeries::parse_csv(&s.to_csv()).unwrap(), s);
    }

    #[test]
    fn log_likes_drops_zeros() {
        let tweets = vec![
            tweet("1", "c", 1, false),
            tweet("2", "c", 0, false),
            tweet("3", "c", 3, false),
            tweet("4", "c", 7, false),
        ];
        let (values, dropped) = log_likes(&tweets, "c");
        assert_eq!(dropped, 1);
        assert_eq!(values, vec![0.0, 3f64.ln(), 7f64.ln()]);
    }

    #[test]
    fn degenerate_histograms() {
        assert!(fd_histogram(&[]).is_empty());
        assert_eq!(
            fd_histogram(&[2.0]),
            vec![HistBin { low: 2.0, high: 3.0, count: 1 }]
        );
        let bins = fd_histogram(&[1.0, 1.0, 1.0, 5.0]);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 4);
    }
}
