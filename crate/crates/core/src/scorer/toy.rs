//! Logistic scorer over hashed prompt features.

use serde::{Deserialize, Serialize};

use super::features::{toy_featurize, FeatureVector};
use super::{PromptScorer, ScoreDistribution, ScorerError};

/// Logits are clamped to this magnitude before the sigmoid.
pub const LOGIT_CLAMP: f64 = 30.0;

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyScorerParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ToyScorerParams {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn logit(&self, features: &FeatureVector) -> f64 {
        debug_assert_eq!(features.dim, self.dim());
        features
            .entries
            .iter()
            .map(|&(i, v)| self.weights[i as usize] * v)
            .sum::<f64>()
            + self.bias
    }
}

pub fn toy_forward(features: &FeatureVector, params: &ToyScorerParams) -> ScoreDistribution {
    let z = params.logit(features).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    ScoreDistribution {
        p_relevant: logistic(z),
    }
}

/// Gradient of a scalar loss with respect to the scorer parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseGradient {
    pub weights: Vec<(u32, f64)>,
    pub bias: f64,
}

/// Chain rule through the sigmoid: `dL/dz = upstream * p(1-p)`, then
/// `dL/dw_j = dL/dz * x_j` at the active indices and `dL/db = dL/dz`.
pub fn toy_backward(
    features: &FeatureVector,
    params: &ToyScorerParams,
    upstream: f64,
) -> SparseGradient {
    let p = toy_forward(features, params).p_relevant;
    backward_at(features, p, upstream)
}

/// [`toy_backward`] with the forward probability already known.
pub fn backward_at(features: &FeatureVector, p: f64, upstream: f64) -> SparseGradient {
    let dz = upstream * p * (1.0 - p);
    SparseGradient {
        weights: features.entries.iter().map(|&(i, v)| (i, dz * v)).collect(),
        bias: dz,
    }
}

/// Built-in scorer: featurize then logistic.
#[derive(Debug, Clone)]
pub struct ToyScorer {
    pub params: ToyScorerParams,
}

impl ToyScorer {
    pub fn new(params: ToyScorerParams) -> Self {
        Self { params }
    }

    pub fn featurize(&self, prompt: &str) -> FeatureVector {
        toy_featurize(prompt, self.params.dim())
    }
}

impl PromptScorer for ToyScorer {
    fn score(&self, prompt: &str) -> Result<ScoreDistribution, ScorerError> {
        if prompt.is_empty() {
            return Err(ScorerError::EmptyPrompt);
        }
        Ok(toy_forward(&self.featurize(prompt), &self.params))
    }
}

/// Dense parameter snapshot as stored in model files: non-zero weights only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseParams {
    pub dim: usize,
    pub bias: f64,
    pub weights: std::collections::BTreeMap<u32, f64>,
}

impl From<&ToyScorerParams> for SparseParams {
    fn from(p: &ToyScorerParams) -> Self {
        Self {
            dim: p.dim(),
            bias: p.bias,
            weights: p
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i as u32, *w))
                .collect(),
        }
    }
}

impl SparseParams {
    pub fn to_dense(&self) -> Result<ToyScorerParams, ScorerError> {
        let mut params = ToyScorerParams::zeros(self.dim);
        params.bias = self.bias;
        for (&i, &w) in &self.weights {
            let slot = params
                .weights
                .get_mut(i as usize)
                .ok_or_else(|| ScorerError::InvalidParams(format!("index {i} >= dim {}", self.dim)))?;
            *slot = w;
        }
        if !params.is_finite() {
            return Err(ScorerError::InvalidParams("non-finite parameter".into()));
        }
        Ok(params)
    }
}
