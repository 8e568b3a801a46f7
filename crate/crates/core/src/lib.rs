//! Campaign engagement analytics over candidate tweets.
//!
//! The pipeline labels each tweet with figure and issue topics by keyword
//! matching, regresses the number of likes on those topics plus a handful of
//! controls with a negative binomial (NB2) model, picks the most salient
//! topics by forward-stepwise search, and scores every candidate's topic mix
//! by the expected likes it generates.
//!
//! Module map:
//!
//! - [`corpus`]: tweet and follower-series ingestion, summary statistics, plot data
//! - [`labeler`]: keyword rules and topic labeling
//! - [`features`]: per-candidate design matrices
//! - [`negbin`]: Poisson and negative binomial maximum likelihood, over-dispersion test
//! - [`stepwise`]: forward-stepwise topic selection
//! - [`tactics`]: marginal effects, conditional topic probabilities, scores and ranks
//! - [`synth`]: synthetic data with known ground truth
//! - [`pipeline`]: batch orchestration behind the `liketally` binary
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod corpus;
pub mod error;
pub mod features;
pub mod labeler;
pub mod negbin;
mod optim;
pub mod output;
pub mod pipeline;
mod special;
pub mod stepwise;
pub mod synth;
pub mod tactics;

pub use error::{Error, Result};
