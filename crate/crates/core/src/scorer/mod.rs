//! Per-prompt relevance scoring.
//!
//! A scorer maps one rendered prompt to the probability of the "relevant"
//! verbalizer. The built-in [`ToyScorer`] is a logistic model over hashed
//! prompt features and is trainable; [`RemoteScorer`] forwards prompts to an
//! external model over HTTP. One scorer is shared by every level of a chain.

mod features;
mod remote;
mod toy;

use serde::{Deserialize, Serialize};

pub use features::{
    feature_index, fnv1a64, toy_featurize, FeatureFamily, FeatureVector, DEFAULT_DIM,
};
pub use remote::{parse_score_response, remote_score, RemoteScorer, ScoreRequest, SCORE_PATH};
pub use toy::{
    backward_at, logistic, toy_backward, toy_forward, SparseGradient, SparseParams, ToyScorer,
    ToyScorerParams, LOGIT_CLAMP,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("scorer timed out")]
    Timeout,
    #[error("scorer returned HTTP {0}")]
    Status(u16),
    #[error("scorer transport: {0}")]
    Transport(String),
    #[error("invalid scorer response: {0}")]
    InvalidResponse(String),
    #[error("p_relevant {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("invalid scorer parameters: {0}")]
    InvalidParams(String),
}

/// Probability of the "relevant" verbalizer; "irrelevant" is the complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub p_relevant: f64,
}

impl ScoreDistribution {
    pub fn new(p_relevant: f64) -> Result<Self, ScorerError> {
        if !(0.0..=1.0).contains(&p_relevant) {
            return Err(ScorerError::OutOfRange(p_relevant));
        }
        Ok(Self { p_relevant })
    }

    pub fn p_irrelevant(&self) -> f64 {
        1.0 - self.p_relevant
    }
}

pub trait PromptScorer: Send + Sync {
    fn score(&self, prompt: &str) -> Result<ScoreDistribution, ScorerError>;
}

impl<T: PromptScorer + ?Sized> PromptScorer for std::sync::Arc<T> {
    fn score(&self, prompt: &str) -> Result<ScoreDistribution, ScorerError> {
        (**self).score(prompt)
    }
}

impl<T: PromptScorer + ?Sized> PromptScorer for Box<T> {
    fn score(&self, prompt: &str) -> Result<ScoreDistribution, ScorerError> {
        (**self).score(prompt)
    }
}
