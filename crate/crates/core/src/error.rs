use thiserror::Error;

use crate::corpus::CorpusError;
use crate::features::FeaturesError;
use crate::labeler::LabelerError;
use crate::negbin::FitError;
use crate::stepwise::StepwiseError;
use crate::synth::SynthError;
use crate::tactics::TacticsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error. Each variant names the module the failure came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("labeler: {0}")]
    Labeler(#[from] LabelerError),
    #[error("features: {0}")]
    Features(#[from] FeaturesError),
    #[error("negbin: {0}")]
    Negbin(#[from] FitError),
    #[error("stepwise: {0}")]
    Stepwise(#[from] StepwiseError),
    #[error("tactics: {0}")]
    Tactics(#[from] TacticsError),
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
    #[error("cli: {context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cli: {0}")]
    Config(String),
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Corpus(_) => "corpus",
            Error::Labeler(_) => "labeler",
            Error::Features(_) => "features",
            Error::Negbin(_) => "negbin",
            Error::Stepwise(_) => "stepwise",
            Error::Tactics(_) => "tactics",
            Error::Synth(_) => "synth",
            Error::Io { .. } | Error::Config(_) => "cli",
        }
    }

    /// Short machine-readable kind, e.g. `empty_matrix` or `singular_design`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Corpus(e) => e.kind(),
            Error::Labeler(e) => e.kind(),
            Error::Features(e) => e.kind(),
            Error::Negbin(e) => e.kind(),
            Error::Stepwise(e) => e.kind(),
            Error::Tactics(e) => e.kind(),
            Error::Synth(_) => "invalid_spec",
            Error::Io { .. } => "io",
            Error::Config(_) => "config",
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
