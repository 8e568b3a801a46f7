//! Batch orchestration: load a corpus once, run one analysis over every
//! selected candidate, write the artifacts.
//!
//! Every artifact is written atomically into the output directory. Analysis
//! commands are deterministic; only `simulate` draws random numbers, from
//! the configured seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{self, FollowerSeries, LikesSummary, Tweet};
use crate::features::{build_design_matrix, candidate_topic_universe, DesignMatrix};
use crate::labeler::{label_corpus, topic_frequencies, RuleSet, TopicKind, TopicLabels};
use crate::negbin::{fit_negbin, fit_poisson, lr_overdispersion, DispersionReport, FitOptions, FitReport, FitResult};
use crate::output::{csv_bytes, json_bytes, write_atomic};
use crate::stepwise::{forward_stepwise, trace_report, CandidateFit, SelectionTrace, StepReport, DEFAULT_K};
use crate::synth::{campaign_scenario, generate_corpus};
use crate::tactics::{tactic_reports, topic_counts, CandidateTactics, EffectMethod, MarginalEffect, RankedCandidate};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(Error::Config(format!("unknown format {s:?}; expected json or csv"))),
        }
    }
}

/// Which fitted model supplies the marginal effects behind a score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalModel {
    /// Controls plus every surviving topic.
    #[default]
    Full,
    /// Controls plus the forward-stepwise selection.
    Selected,
}

impl FromStr for EvalModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(EvalModel::Full),
            "selected" => Ok(EvalModel::Selected),
            _ => Err(Error::Config(format!("unknown eval model {s:?}; expected full or selected"))),
        }
    }
}

impl FromStr for EffectMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(EffectMethod::Discrete),
            "beta-mu" => Ok(EffectMethod::BetaMu),
            _ => Err(Error::Config(format!("unknown effect method {s:?}; expected discrete or beta-mu"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Summarize,
    Label,
    Fit,
    Select,
    Effects,
    Rank,
    PlotData,
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Summarize => "summarize",
            Command::Label => "label",
            Command::Fit => "fit",
            Command::Select => "select",
            Command::Effects => "effects",
            Command::Rank => "rank",
            Command::PlotData => "plotdata",
            Command::Simulate => "simulate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tweets: Option<PathBuf>,
    pub followers: Option<PathBuf>,
    /// Shipped default rules when `None`.
    pub rules: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Every candidate in the corpus when empty.
    pub candidates: Vec<String>,
    pub k: usize,
    pub fit: FitOptions,
    pub effect_method: EffectMethod,
    pub eval_model: EvalModel,
    pub format: OutputFormat,
    pub seed: u64,
    /// Original tweets per candidate for `simulate`.
    pub simulate_tweets: usize,
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            tweets: None,
            followers: None,
            rules: None,
            out_dir: out_dir.into(),
            candidates: Vec::new(),
            k: DEFAULT_K,
            fit: FitOptions::default(),
            effect_method: EffectMethod::default(),
            eval_model: EvalModel::default(),
            format: OutputFormat::default(),
            seed: 20160209,
            simulate_tweets: 400,
        }
    }

    fn required<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        let p = path
            .as_deref()
            .ok_or_else(|| Error::Config(format!("--{flag} is required")))?;
        if !p.exists() {
            return Err(Error::Config(format!("--{flag}: {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn load_rules(&self) -> Result<RuleSet> {
        match &self.rules {
            Some(p) => Ok(RuleSet::load(p)?),
            None => Ok(RuleSet::default_rules()),
        }
    }
}

/// A loaded and labeled corpus.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub tweets: Vec<Tweet>,
    pub followers: Option<FollowerSeries>,
    pub rules: RuleSet,
    pub labels: Vec<TopicLabels>,
}

/// Everything a candidate's score was computed from, so it can be checked
/// by hand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalIntermediates {
    pub candidate: String,
    pub eval_model: EvalModel,
    pub effect_method: EffectMethod,
    pub columns: Vec<String>,
    pub beta: Vec<f64>,
    pub column_means: Vec<f64>,
    pub universe: Vec<String>,
    pub topic_counts: BTreeMap<String, usize>,
    /// Tweets raising at least one universe topic.
    pub topical_tweets: usize,
    pub score: f64,
}

/// Fit, selection and tactics for one candidate.
#[derive(Debug, Clone)]
pub struct CandidateRun {
    pub candidate: String,
    pub design: DesignMatrix,
    pub fit: FitResult,
    pub trace: Option<SelectionTrace>,
    pub tactics: CandidateTactics,
    pub intermediates: EvalIntermediates,
}

impl Analysis {
    pub fn new(tweets: Vec<Tweet>, followers: Option<FollowerSeries>, rules: RuleSet) -> Self {
        let labels = label_corpus(&tweets, &rules);
        Analysis {
            tweets,
            followers,
            rules,
            labels,
        }
    }

    /// Reads the tweets, the follower series when configured, and the rules.
    pub fn load(config: &RunConfig) -> Result<Self> {
        let tweets = corpus::parse_tweets(config.required(&config.tweets, "tweets")?)?;
        let followers = match &config.followers {
            Some(_) => Some(FollowerSeries::parse(config.required(&config.followers, "followers")?)?),
            None => None,
        };
        Ok(Analysis::new(tweets, followers, config.load_rules()?))
    }

    pub fn candidates(&self, filter: &[String]) -> Result<Vec<String>> {
        let all = corpus::candidates(&self.tweets);
        if filter.is_empty() {
            return Ok(all);
        }
        let mut out: Vec<String> = Vec::new();
        for c in filter {
            if !all.contains(c) {
                return Err(corpus::CorpusError::EmptyGroup(c.clone()).into());
            }
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
        out.sort();
        Ok(out)
    }

    fn followers(&self) -> Result<&FollowerSeries> {
        self.followers
            .as_ref()
            .ok_or_else(|| Error::Config("--followers is required for this command".into()))
    }

    /// Topic sets of the candidate's non-retweet tweets.
    pub fn own_labels(&self, candidate: &str) -> Vec<&BTreeSet<String>> {
        self.tweets
            .iter()
            .zip(&self.labels)
            .filter(|(t, _)| t.candidate == candidate && !t.is_retweet)
            .map(|(_, l)| &l.topics)
            .collect()
    }

    pub fn design(&self, candidate: &str) -> Result<DesignMatrix> {
        Ok(build_design_matrix(
            &self.tweets,
            &self.labels,
            self.followers()?,
            candidate,
            &self.rules,
        )?)
    }

    pub fn fit(&self, design: &DesignMatrix, options: &FitOptions) -> Result<FitResult> {
        Ok(fit_negbin(&design.y, &design.x, options)?)
    }

    /// Full pipeline for one candidate: design, full fit, optional
    /// selection, effects, probabilities and score.
    pub fn run_candidate(&self, candidate: &str, config: &RunConfig, select: bool) -> Result<CandidateRun> {
        let design = self.design(candidate)?;
        let full = self.fit(&design, &config.fit)?;
        let trace = if select || config.eval_model == EvalModel::Selected {
            Some(forward_stepwise(&design, clamp_k(&design, config.k), &config.fit)?)
        } else {
            None
        };
        let (eval_design, eval_fit) = match (config.eval_model, &trace) {
            (EvalModel::Selected, Some(t)) => {
                let (cols, fit) = t.final_model();
                (design.select(cols)?, fit.clone())
            }
            _ => (design.clone(), full.clone()),
        };
        let universe = candidate_topic_universe(&self.rules, candidate);
        let labels = self.own_labels(candidate);
        let tactics = CandidateTactics::evaluate(
            &eval_fit,
            &eval_design,
            labels.iter().copied(),
            &universe,
            config.effect_method,
        )?;
        let (counts, topical) = topic_counts(labels.iter().copied(), &universe);
        let intermediates = EvalIntermediates {
            candidate: candidate.to_string(),
            eval_model: config.eval_model,
            effect_method: config.effect_method,
            columns: eval_design.column_names.clone(),
            beta: eval_fit.coefficients.clone(),
            column_means: eval_design.column_means(),
            universe,
            topic_counts: counts,
            topical_tweets: topical,
            score: tactics.score,
        };
        Ok(CandidateRun {
            candidate: candidate.to_string(),
            design,
            fit: full,
            trace,
            tactics,
            intermediates,
        })
    }
}

/// `k`, or every surviving topic when fewer than `k` survive pruning.
fn clamp_k(design: &DesignMatrix, k: usize) -> usize {
    let available = design.topic_columns.len();
    if available < k {
        log::warn!(
            "{}: only {available} topics survive pruning; selecting {available}",
            design.candidate
        );
    }
    k.min(available)
}

fn par_candidates<T, F>(candidates: &[String], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&str) -> Result<T> + Sync,
{
    candidates.par_iter().map(|c| f(c)).collect()
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        log::info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let bytes = json_bytes(value).map_err(|e| Error::io(format!("serializing {name}"), e))?;
        self.put(name, &bytes)
    }

    fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let bytes = csv_bytes(header, rows).map_err(|e| Error::io(format!("serializing {name}"), e))?;
        self.put(name, &bytes)
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Runs `command` and returns the paths it wrote.
pub fn run(command: Command, config: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut w = Writer {
        dir: &config.out_dir,
        written: Vec::new(),
    };
    if command == Command::Simulate {
        simulate(config, &mut w)?;
        return Ok(w.written);
    }
    let analysis = Analysis::load(config)?;
    let candidates = analysis.candidates(&config.candidates)?;
    log::info!("{command}: {} tweets, candidates {candidates:?}", analysis.tweets.len());
    match command {
        Command::Summarize => summarize(&analysis, &candidates, config.format, &mut w)?,
        Command::Label => label(&analysis, &candidates, config.format, &mut w)?,
        Command::Fit => fit(&analysis, &candidates, config, &mut w)?,
        Command::Select => select(&analysis, &candidates, config, &mut w)?,
        Command::Effects => effects(&analysis, &candidates, config, &mut w)?,
        Command::Rank => rank(&analysis, &candidates, config, &mut w)?,
        Command::PlotData => {
            let tweets: Vec<Tweet> = analysis
                .tweets
                .iter()
                .filter(|t| candidates.contains(&t.candidate))
                .cloned()
                .collect();
            let summary = corpus::emit_plot_data(&tweets, analysis.followers()?, &config.out_dir)?;
            for name in ["log_likes.csv", "log_likes_hist.csv", "followers_daily.csv"] {
                w.written.push(config.out_dir.join(name));
            }
            w.json("plotdata_summary.json", &summary)?;
        }
        Command::Simulate => unreachable!("handled above"),
    }
    Ok(w.written)
}

fn summarize(a: &Analysis, candidates: &[String], format: OutputFormat, w: &mut Writer) -> Result<()> {
    let rows: Vec<LikesSummary> = candidates
        .iter()
        .map(|c| corpus::summarize_likes(&a.tweets, c))
        .collect::<Result<_, _>>()?;
    match format {
        OutputFormat::Json => w.json("summary.json", &rows),
        OutputFormat::Csv => w.csv(
            "summary.csv",
            &["candidate", "mean", "sd", "min", "max", "n"],
            rows.iter().map(|r| {
                [
                    r.candidate.clone(),
                    num(r.mean),
                    num(r.sd),
                    r.min.to_string(),
                    r.max.to_string(),
                    r.n.to_string(),
                ]
            }),
        ),
    }
}

fn label(a: &Analysis, candidates: &[String], format: OutputFormat, w: &mut Writer) -> Result<()> {
    let freqs: BTreeMap<String, BTreeMap<String, usize>> = candidates
        .iter()
        .map(|c| {
            let labels = a
                .tweets
                .iter()
                .zip(&a.labels)
                .filter(|(t, _)| t.candidate == *c && !t.is_retweet)
                .map(|(_, l)| l);
            (c.clone(), topic_frequencies(labels, &a.rules))
        })
        .collect();
    let labels: Vec<&TopicLabels> = a
        .tweets
        .iter()
        .zip(&a.labels)
        .filter(|(t, _)| candidates.contains(&t.candidate))
        .map(|(_, l)| l)
        .collect();
    let mut jsonl = String::new();
    for l in &labels {
        jsonl.push_str(&serde_json::to_string(l).expect("labels serialize"));
        jsonl.push('\n');
    }
    w.put("labels.jsonl", jsonl.as_bytes())?;
    match format {
        OutputFormat::Json => w.json("topic_frequencies.json", &freqs),
        OutputFormat::Csv => {
            let kind = |t: &str| match a.rules.get(t).map(|r| r.kind) {
                Some(TopicKind::Figure) => "figure",
                _ => "issue",
            };
            w.csv(
                "topic_frequencies.csv",
                &["candidate", "topic", "kind", "count"],
                freqs.iter().flat_map(|(c, m)| {
                    m.iter()
                        .map(move |(t, n)| [c.clone(), t.clone(), kind(t).to_string(), n.to_string()])
                }),
            )
        }
    }
}

#[derive(Serialize)]
struct FitArtifact {
    fit: FitReport,
    dispersion: DispersionReport,
    alpha_se: f64,
}

fn fit(a: &Analysis, candidates: &[String], config: &RunConfig, w: &mut Writer) -> Result<()> {
    let out: Vec<(String, FitArtifact)> = par_candidates(candidates, |c| {
        let design = a.design(c)?;
        let nb = a.fit(&design, &config.fit)?;
        let pois = fit_poisson(&design.y, &design.x)?;
        let lr = lr_overdispersion(&nb, &pois)?;
        Ok((
            c.to_string(),
            FitArtifact {
                fit: FitReport::new(c, &design.column_names, &nb),
                dispersion: DispersionReport::new(c, &nb, &pois, &lr),
                alpha_se: nb.alpha_se,
            },
        ))
    })?;
    match config.format {
        OutputFormat::Json => w.json("fits.json", &out.into_iter().collect::<BTreeMap<_, _>>()),
        OutputFormat::Csv => {
            w.csv(
                "fits.csv",
                &["candidate", "column", "beta", "se", "z", "p"],
                out.iter().flat_map(|(c, f)| {
                    (0..f.fit.columns.len()).map(move |i| {
                        [
                            c.clone(),
                            f.fit.columns[i].clone(),
                            num(f.fit.beta[i]),
                            num(f.fit.se[i]),
                            num(f.fit.z[i]),
                            num(f.fit.p[i]),
                        ]
                    })
                }),
            )?;
            w.csv(
                "dispersion.csv",
                &[
                    "candidate", "alpha", "alpha_se", "loglik", "aic", "n", "poisson_loglik", "lr_statistic",
                    "lr_p_value",
                ],
                out.iter().map(|(c, f)| {
                    [
                        c.clone(),
                        num(f.fit.alpha),
                        num(f.alpha_se),
                        num(f.fit.loglik),
                        num(f.fit.aic),
                        f.fit.n.to_string(),
                        num(f.dispersion.poisson_loglik),
                        num(f.dispersion.lr_statistic),
                        num(f.dispersion.lr_p_value),
                    ]
                }),
            )
        }
    }
}

#[derive(Serialize)]
struct SelectionArtifact {
    base_columns: Vec<String>,
    base_loglik: f64,
    base_aic: f64,
    steps: Vec<StepReport>,
    tried: Vec<Vec<(String, CandidateFit)>>,
}

fn select(a: &Analysis, candidates: &[String], config: &RunConfig, w: &mut Writer) -> Result<()> {
    let out: Vec<(String, SelectionArtifact)> = par_candidates(candidates, |c| {
        let design = a.design(c)?;
        let trace = forward_stepwise(&design, clamp_k(&design, config.k), &config.fit)?;
        Ok((
            c.to_string(),
            SelectionArtifact {
                base_columns: trace.base_columns.clone(),
                base_loglik: trace.base.loglik,
                base_aic: trace.base.aic,
                steps: trace_report(&trace),
                tried: trace.steps.iter().map(|s| s.tried.clone()).collect(),
            },
        ))
    })?;
    match config.format {
        OutputFormat::Json => w.json("selection.json", &out.into_iter().collect::<BTreeMap<_, _>>()),
        OutputFormat::Csv => w.csv(
            "selection.csv",
            &["candidate", "step", "topic", "beta", "se", "p", "loglik", "aic"],
            out.iter().flat_map(|(c, s)| {
                s.steps.iter().map(move |st| {
                    let i = st
                        .fit
                        .columns
                        .iter()
                        .position(|col| *col == st.topic)
                        .expect("selected topic is a column");
                    [
                        c.clone(),
                        st.step.to_string(),
                        st.topic.clone(),
                        num(st.fit.beta[i]),
                        num(st.fit.se[i]),
                        num(st.fit.p[i]),
                        num(st.loglik),
                        num(st.aic),
                    ]
                })
            }),
        ),
    }
}

fn effects(a: &Analysis, candidates: &[String], config: &RunConfig, w: &mut Writer) -> Result<()> {
    let runs = par_candidates(candidates, |c| a.run_candidate(c, config, false))?;
    let out: BTreeMap<String, &BTreeMap<String, MarginalEffect>> =
        runs.iter().map(|r| (r.candidate.clone(), &r.tactics.effects)).collect();
    match config.format {
        OutputFormat::Json => w.json("effects.json", &out),
        OutputFormat::Csv => w.csv(
            "effects.csv",
            &["candidate", "topic", "effect", "ci_low", "ci_high"],
            out.iter().flat_map(|(c, m)| {
                m.values()
                    .map(move |e| [c.clone(), e.topic_id.clone(), num(e.effect), num(e.ci_low), num(e.ci_high)])
            }),
        ),
    }
}

fn rank(a: &Analysis, candidates: &[String], config: &RunConfig, w: &mut Writer) -> Result<()> {
    let runs = par_candidates(candidates, |c| a.run_candidate(c, config, false))?;
    let tactics: Vec<CandidateTactics> = runs.iter().map(|r| r.tactics.clone()).collect();
    let reports = tactic_reports(&tactics);
    let intermediates: BTreeMap<&str, &EvalIntermediates> =
        runs.iter().map(|r| (r.candidate.as_str(), &r.intermediates)).collect();
    w.json("rank_intermediates.json", &intermediates)?;
    let mut table: Vec<RankedCandidate> = reports
        .iter()
        .map(|(c, r)| RankedCandidate {
            candidate: c.clone(),
            score: r.score,
            rank: r.rank,
        })
        .collect();
    table.sort_by_key(|r| r.rank);
    match config.format {
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct RankArtifact<'a> {
                ranking: &'a [RankedCandidate],
                reports: &'a BTreeMap<String, crate::tactics::TacticReport>,
            }
            w.json(
                "rank.json",
                &RankArtifact {
                    ranking: &table,
                    reports: &reports,
                },
            )
        }
        OutputFormat::Csv => w.csv(
            "rank.csv",
            &["rank", "candidate", "score"],
            table.iter().map(|r| [r.rank.to_string(), r.candidate.clone(), num(r.score)]),
        ),
    }
}

fn simulate(config: &RunConfig, w: &mut Writer) -> Result<()> {
    let rules = config.load_rules()?;
    let mut spec = campaign_scenario(config.seed, config.simulate_tweets);
    if !config.candidates.is_empty() {
        spec.candidates.retain(|c| config.candidates.contains(&c.id));
        if spec.candidates.is_empty() {
            return Err(Error::Config(format!(
                "none of {:?} is a simulated candidate",
                config.candidates
            )));
        }
    }
    let corpus = generate_corpus(&spec, &rules)?;
    w.put("tweets.jsonl", corpus::tweets_to_jsonl(&corpus.tweets).as_bytes())?;
    w.put("followers.csv", &corpus.followers.to_csv())?;
    w.json("ground_truth.json", &spec)
}
