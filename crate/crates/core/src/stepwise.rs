//! Forward-stepwise topic selection.
//!
//! Controls are always in the model. Each step refits the model once per
//! remaining topic and keeps the topic whose fit has the highest
//! log-likelihood. All same-step models have the same number of parameters,
//! so ranking them by AIC gives the same winner; each step records both.
//!
//! Ties on log-likelihood go to the lexicographically smallest topic id.
//! Sub-fits that fail (singular design, non-concave optimum) are skipped
//! and non-converged sub-fits are never selected.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::features::{DesignMatrix, FeaturesError};
use crate::negbin::{fit_negbin, FitError, FitOptions, FitReport, FitResult};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error)]
pub enum StepwiseError {
    #[error("k = {k} exceeds the {available} available topics")]
    KTooLarge { k: usize, available: usize },
    #[error("controls-only model: {0}")]
    BaseFit(FitError),
    #[error(transparent)]
    Features(#[from] FeaturesError),
    #[error("no topic could be fitted at step {step}")]
    NoViableTopic { step: usize },
}

impl StepwiseError {
    pub fn kind(&self) -> &'static str {
        match self {
            StepwiseError::KTooLarge { .. } => "bound",
            StepwiseError::BaseFit(e) => e.kind(),
            StepwiseError::Features(e) => e.kind(),
            StepwiseError::NoViableTopic { .. } => "no_viable_topic",
        }
    }
}

/// How one remaining topic fared within a step.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CandidateFit {
    Fitted { loglik: f64, aic: f64, converged: bool },
    Skipped { reason: String },
}

impl CandidateFit {
    /// Log-likelihood used for selection; −∞ unless the fit converged.
    pub fn score(&self) -> f64 {
        match self {
            CandidateFit::Fitted {
                loglik,
                converged: true,
                ..
            } => *loglik,
            _ => f64::NEG_INFINITY,
        }
    }

    fn aic_score(&self) -> f64 {
        match self {
            CandidateFit::Fitted {
                aic, converged: true, ..
            } => *aic,
            _ => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectionStep {
    pub topic: String,
    pub loglik: f64,
    pub aic: f64,
    /// Column names of the winning model, aligned with `fit.coefficients`.
    pub columns: Vec<String>,
    pub fit: FitResult,
    /// Every topic tried at this step, in design column order.
    pub tried: Vec<(String, CandidateFit)>,
    /// Topic with the smallest AIC at this step (same tie-break).
    pub aic_choice: String,
}

#[derive(Debug, Clone)]
pub struct SelectionTrace {
    pub candidate: String,
    pub k: usize,
    pub base_columns: Vec<String>,
    /// Controls-only model.
    pub base: FitResult,
    pub steps: Vec<SelectionStep>,
}

impl SelectionTrace {
    pub fn selected(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.topic.clone()).collect()
    }

    /// Columns and fit of the final model (the base model when `k = 0`).
    pub fn final_model(&self) -> (&[String], &FitResult) {
        match self.steps.last() {
            Some(s) => (&s.columns, &s.fit),
            None => (&self.base_columns, &self.base),
        }
    }
}

/// Picks the best entry: highest `key`, ties to the smallest topic id.
fn best_by<F>(tried: &[(String, CandidateFit)], key: F) -> Option<&str>
where
    F: Fn(&CandidateFit) -> f64,
{
    tried
        .iter()
        .filter(|(_, c)| key(c).is_finite())
        .min_by(|(ta, a), (tb, b)| {
            key(b)
                .partial_cmp(&key(a))
                .unwrap_or(Ordering::Equal)
                .then_with(|| ta.cmp(tb))
        })
        .map(|(t, _)| t.as_str())
}

/// Selects up to `k` topics from `design.topic_columns`.
pub fn forward_stepwise(
    design: &DesignMatrix,
    k: usize,
    options: &FitOptions,
) -> Result<SelectionTrace, StepwiseError> {
    let available = design.topic_columns.len();
    if k > available {
        return Err(StepwiseError::KTooLarge { k, available });
    }
    let base_design = design.with_topics(&[])?;
    let base = fit_negbin(&base_design.y, &base_design.x, options).map_err(StepwiseError::BaseFit)?;

    let mut selected: Vec<String> = Vec::new();
    let mut remaining: Vec<String> = design.topic_columns.clone();
    let mut steps = Vec::with_capacity(k);

    for step in 1..=k {
        let attempts: Vec<(String, Result<(DesignMatrix, FitResult), FitError>)> = remaining
            .par_iter()
            .map(|topic| {
                let mut topics = selected.clone();
                topics.push(topic.clone());
                let sub = design
                    .with_topics(&topics)
                    .expect("topic columns come from the design");
                let fit = fit_negbin(&sub.y, &sub.x, options).map(|f| (sub, f));
                (topic.clone(), fit)
            })
            .collect();

        let tried: Vec<(String, CandidateFit)> = attempts
            .iter()
            .map(|(topic, res)| {
                let outcome = match res {
                    Ok((_, fit)) => {
                        if !fit.converged {
                            log::warn!(
                                "{}: step {step}: fit with {topic} did not converge; not selectable",
                                design.candidate
                            );
                        }
                        CandidateFit::Fitted {
                            loglik: fit.loglik,
                            aic: fit.aic,
                            converged: fit.converged,
                        }
                    }
                    Err(e) => {
                        log::warn!("{}: step {step}: skipping {topic}: {e}", design.candidate);
                        CandidateFit::Skipped {
                            reason: e.to_string(),
                        }
                    }
                };
                (topic.clone(), outcome)
            })
            .collect();

        let winner = best_by(&tried, CandidateFit::score)
            .ok_or(StepwiseError::NoViableTopic { step })?
            .to_string();
        let aic_choice = best_by(&tried, |c| -c.aic_score())
            .expect("a finite log-likelihood implies a finite AIC")
            .to_string();
        debug_assert_eq!(winner, aic_choice);

        let (_, res) = attempts
            .into_iter()
            .find(|(t, _)| *t == winner)
            .expect("winner was tried");
        let (sub, fit) = res.expect("winner fitted");
        selected.push(winner.clone());
        remaining.retain(|t| *t != winner);
        steps.push(SelectionStep {
            topic: winner,
            loglik: fit.loglik,
            aic: fit.aic,
            columns: sub.column_names,
            fit,
            tried,
            aic_choice,
        });
    }

    Ok(SelectionTrace {
        candidate: design.candidate.clone(),
        k,
        base_columns: base_design.column_names,
        base,
        steps,
    })
}

/// JSON form of one step: `{topic, loglik, aic, fit}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub topic: String,
    pub loglik: f64,
    pub aic: f64,
    pub fit: FitReport,
}

pub fn trace_report(trace: &SelectionTrace) -> Vec<StepReport> {
    trace
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| StepReport {
            step: i + 1,
            topic: s.topic.clone(),
            loglik: s.loglik,
            aic: s.aic,
            fit: FitReport::new(&trace.candidate, &s.columns, &s.fit),
        })
        .collect()
}
