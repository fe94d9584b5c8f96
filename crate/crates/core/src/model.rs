//! Deployable model bundles and end-to-end pair scoring.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregation::{aggregate, kernel_weights, AggregationError, Kernel, KernelParams};
use crate::behavior_index::BehaviorKnowledge;
use crate::prompt::{build_prompt_chain, validate_templates, PromptError, PromptTemplate};
use crate::scorer::{PromptScorer, ScorerError, SparseParams, ToyScorer, ToyScorerParams, DEFAULT_DIM};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error("model bundle: {0}")]
    Bundle(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub learning_rate: f64,
    /// Separate step size for λ; falls back to `learning_rate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_learning_rate: Option<f64>,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub levels: usize,
    pub kernel: Kernel,
    pub dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            learning_rate: 0.1,
            lambda_learning_rate: None,
            batch_size: 64,
            epochs: 5,
            seed: 0,
            levels: 3,
            kernel: Kernel::Exponential,
            dim: DEFAULT_DIM,
        }
    }
}

impl TrainConfig {
    pub fn lambda_rate(&self) -> f64 {
        self.lambda_learning_rate.unwrap_or(self.learning_rate)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(format!("alpha must be a finite non-negative number, got {}", self.alpha));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if let Some(r) = self.lambda_learning_rate {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(format!("lambda learning rate must be non-negative, got {r}"));
            }
        }
        if self.batch_size == 0 {
            return Err("batch size must be at least 1".into());
        }
        if self.levels == 0 {
            return Err("prompt levels must be at least 1".into());
        }
        if self.dim == 0 || self.dim > u32::MAX as usize {
            return Err(format!("feature dimension {} out of range", self.dim));
        }
        Ok(())
    }
}

/// Everything needed to score pairs: scorer parameters, kernel state,
/// templates and the training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub model_version: String,
    pub index_version: String,
    pub lambda: f64,
    pub config: TrainConfig,
    pub templates: Vec<PromptTemplate>,
    pub scorer: SparseParams,
}

impl ModelBundle {
    /// Assembles a bundle and derives its content-addressed version.
    pub fn new(
        params: &ToyScorerParams,
        lambda: f64,
        templates: Vec<PromptTemplate>,
        config: TrainConfig,
        index_version: impl Into<String>,
    ) -> Self {
        let mut bundle = Self {
            model_version: String::new(),
            index_version: index_version.into(),
            lambda,
            config,
            templates,
            scorer: SparseParams::from(params),
        };
        bundle.model_version = bundle.content_version();
        bundle
    }

    /// Hash of every field except `model_version` itself.
    pub fn content_version(&self) -> String {
        let mut unversioned = self.clone();
        unversioned.model_version.clear();
        let bytes = serde_json::to_vec(&unversioned).expect("bundle serializes");
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        format!("m-{hex}")
    }

    pub fn kernel_params(&self) -> Result<KernelParams, ModelError> {
        Ok(KernelParams::new(
            self.config.kernel,
            self.lambda,
            self.templates.len(),
        )?)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        validate_templates(&self.templates)?;
        if self.templates.len() != self.config.levels {
            return Err(ModelError::Bundle(format!(
                "{} templates for {} levels",
                self.templates.len(),
                self.config.levels
            )));
        }
        if self.scorer.dim != self.config.dim {
            return Err(ModelError::Bundle("scorer dimension disagrees with config".into()));
        }
        if !self.lambda.is_finite() {
            return Err(ModelError::Bundle("non-finite lambda".into()));
        }
        if self.model_version != self.content_version() {
            return Err(ModelError::Bundle(
                "model_version does not match bundle contents".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        let mut s = serde_json::to_string(self).map_err(|e| ModelError::Bundle(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let bundle: Self =
            serde_json::from_str(text).map_err(|e| ModelError::Bundle(e.to_string()))?;
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json()?)
            .map_err(|e| ModelError::Bundle(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ModelError::Bundle(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Per-pair output of the full chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub score: f64,
    pub per_prompt_scores: Vec<f64>,
    pub weights: Vec<f64>,
}

/// A bundle's templates and kernel paired with a live scorer.
#[derive(Clone)]
pub struct RelevanceModel {
    pub model_version: String,
    templates: Vec<PromptTemplate>,
    kernel: KernelParams,
    scorer: Arc<dyn PromptScorer>,
}

impl std::fmt::Debug for RelevanceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RelevanceModel")
            .field("model_version", &self.model_version)
            .field("kernel", &self.kernel)
            .finish_non_exhaustive()
    }
}

impl RelevanceModel {
    /// Uses the bundle's own toy scorer.
    pub fn from_bundle(bundle: &ModelBundle) -> Result<Self, ModelError> {
        let params = bundle.scorer.to_dense()?;
        Self::with_scorer(bundle, Arc::new(ToyScorer::new(params)))
    }

    /// Uses the bundle's templates and kernel with an external scorer.
    pub fn with_scorer(
        bundle: &ModelBundle,
        scorer: Arc<dyn PromptScorer>,
    ) -> Result<Self, ModelError> {
        validate_templates(&bundle.templates)?;
        Ok(Self {
            model_version: bundle.model_version.clone(),
            templates: bundle.templates.clone(),
            kernel: bundle.kernel_params()?,
            scorer,
        })
    }

    pub fn templates(&self) -> &[PromptTemplate] {
        &self.templates
    }

    pub fn score_pair(
        &self,
        knowledge: &BehaviorKnowledge,
        query: &str,
        item: &str,
    ) -> Result<PairScore, ModelError> {
        let chain = build_prompt_chain(query, item, knowledge, &self.templates)?;
        let per_prompt = chain
            .levels
            .iter()
            .map(|p| self.scorer.score(p).map(|d| d.p_relevant))
            .collect::<Result<Vec<_>, _>>()?;
        let out = aggregate(&per_prompt, &kernel_weights(&self.kernel))?;
        Ok(PairScore {
            score: out.overall_p,
            per_prompt_scores: per_prompt,
            weights: out.weights,
        })
    }
}
