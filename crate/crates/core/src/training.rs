//! End-to-end fitting of the shared scorer and the kernel parameter.
//!
//! Every example is expanded into its prompt chain, each level is scored by
//! the same parameters, and the hybrid loss is back-propagated through the
//! aggregation into λ and the scorer. Updates are plain mini-batch gradient
//! descent on batch-mean gradients. Batches are reduced sequentially in a
//! fixed order, so a run is bit-reproducible from `(dataset, config)`.

use std::fs;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::{loss_gradients, KernelParams};
use crate::behavior_index::{normalize_key, BehaviorKnowledge};
use crate::model::{ModelBundle, ModelError, TrainConfig};
use crate::prompt::{build_prompt_chain, validate_templates, PromptTemplate};
use crate::scorer::{backward_at, toy_featurize, toy_forward, FeatureVector, ToyScorerParams};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(
        "loss became non-finite at epoch {epoch}, batch {batch}; lower the learning rate (currently {learning_rate})"
    )]
    Diverged {
        epoch: usize,
        batch: usize,
        learning_rate: f64,
    },
    #[error("need at least 3 pairs to split, got {0}")]
    TooFewPairs(usize),
    #[error("split fractions must be positive and sum to 1")]
    BadFractions,
    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub query: String,
    pub item: String,
    pub label: u8,
}

impl LabeledPair {
    pub fn new(query: &str, item: &str, label: u8) -> Result<Self, String> {
        if label > 1 {
            return Err(format!("label must be 0 or 1, got {label}"));
        }
        Ok(Self {
            query: normalize_key(query).map_err(|e| e.to_string())?,
            item: normalize_key(item).map_err(|e| e.to_string())?,
            label,
        })
    }
}

/// Reads JSON-lines `{query, item, label}`. Unlike log ingestion, any bad
/// line fails the whole read: labels are curated input.
pub fn read_labeled_pairs<R: BufRead>(reader: R) -> Result<Vec<LabeledPair>, TrainError> {
    let mut pairs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let err = |message: String| TrainError::Dataset {
            line: n + 1,
            message,
        };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: LabeledPair = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        pairs.push(LabeledPair::new(&raw.query, &raw.item, raw.label).map_err(err)?);
    }
    Ok(pairs)
}

pub fn write_labeled_pairs(path: &Path, pairs: &[LabeledPair]) -> std::io::Result<()> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p).expect("pair serializes"));
        out.push('\n');
    }
    fs::write(path, out)
}

/// Train, validation and test slices.
pub type Split = (Vec<LabeledPair>, Vec<LabeledPair>, Vec<LabeledPair>);

/// Seeded shuffle, then contiguous train / validation / test slices.
pub fn split_dataset(
    pairs: &[LabeledPair],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<Split, TrainError> {
    let (a, b, c) = fractions;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(TrainError::BadFractions);
    }
    let n = pairs.len();
    if n < 3 {
        return Err(TrainError::TooFewPairs(n));
    }
    let mut shuffled = pairs.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * a).round() as usize).clamp(1, n - 2);
    let n_valid = ((n as f64 * b).round() as usize).clamp(1, n - n_train - 1);
    let test = shuffled.split_off(n_train + n_valid);
    let valid = shuffled.split_off(n_train);
    Ok((shuffled, valid, test))
}

/// Dataset-mean losses after an epoch; epoch 0 is the initial model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub main: f64,
    pub auxi: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub bundle: ModelBundle,
    pub trace: Vec<EpochLoss>,
}

/// Rendered prompt chain for one labeled pair. Features are recomputed on
/// use; caching them costs far more memory than hashing does time.
struct Example {
    prompts: Vec<String>,
    label: u8,
}

/// Trainable state: scorer parameters plus λ.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ToyScorerParams,
    pub lambda: f64,
}

/// Accumulated batch gradient; weights are dense with a touched-index list.
struct GradientBuffer {
    weights: Vec<f64>,
    touched: Vec<u32>,
    bias: f64,
    lambda: f64,
}

impl GradientBuffer {
    fn new(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            touched: Vec::new(),
            bias: 0.0,
            lambda: 0.0,
        }
    }

    fn add_weight(&mut self, index: u32, value: f64) {
        let slot = &mut self.weights[index as usize];
        if *slot == 0.0 {
            self.touched.push(index);
        }
        *slot += value;
    }

    /// Applies `-rate * grad / n` and clears the buffer.
    fn apply(&mut self, state: &mut TrainState, rate: f64, lambda_rate: f64, n: usize) {
        let scale = 1.0 / n as f64;
        for &i in &self.touched {
            let g = &mut self.weights[i as usize];
            state.params.weights[i as usize] -= rate * *g * scale;
            *g = 0.0;
        }
        self.touched.clear();
        state.params.bias -= rate * self.bias * scale;
        state.lambda -= lambda_rate * self.lambda * scale;
        self.bias = 0.0;
        self.lambda = 0.0;
    }
}

/// Loss and gradient contribution of one example. Returns the loss
/// breakdown; gradients go into `grad` when given.
fn example_step(
    example: &Example,
    dim: usize,
    state: &TrainState,
    kernel: &KernelParams,
    alpha: f64,
    grad: Option<&mut GradientBuffer>,
) -> Result<crate::aggregation::LossBreakdown, ModelError> {
    let features: Vec<FeatureVector> = example
        .prompts
        .iter()
        .map(|p| toy_featurize(p, dim))
        .collect();
    let per_prompt: Vec<f64> = features
        .iter()
        .map(|x| toy_forward(x, &state.params).p_relevant)
        .collect();
    let kernel = KernelParams {
        lambda: state.lambda,
        ..kernel.clone()
    };
    let g = loss_gradients(&per_prompt, &kernel, example.label, alpha)?;
    if let Some(buf) = grad {
        for ((x, p), d) in features.iter().zip(&per_prompt).zip(&g.d_per_prompt) {
            let sg = backward_at(x, *p, *d);
            for (i, v) in sg.weights {
                // exact zero would confuse the touched-index bookkeeping
                if v != 0.0 {
                    buf.add_weight(i, v);
                }
            }
            buf.bias += sg.bias;
        }
        buf.lambda += g.d_lambda;
    }
    Ok(g.loss)
}

/// Exact gradient of one example's hybrid loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleGradient {
    pub loss: crate::aggregation::LossBreakdown,
    /// Nonzero weight partials, sorted by feature index.
    pub weights: Vec<(u32, f64)>,
    pub bias: f64,
    pub lambda: f64,
}

/// Loss and gradient with respect to scorer weights, bias and λ for one
/// rendered prompt chain, through featurization, scoring and aggregation.
pub fn example_gradient(
    prompts: &[String],
    label: u8,
    state: &TrainState,
    kernel: &KernelParams,
    alpha: f64,
) -> Result<ExampleGradient, ModelError> {
    let dim = state.params.weights.len();
    let example = Example {
        prompts: prompts.to_vec(),
        label,
    };
    let mut buf = GradientBuffer::new(dim);
    let loss = example_step(&example, dim, state, kernel, alpha, Some(&mut buf))?;
    let mut touched = buf.touched.clone();
    touched.sort_unstable();
    touched.dedup();
    let weights = touched
        .into_iter()
        .map(|i| (i, buf.weights[i as usize]))
        .filter(|(_, v)| *v != 0.0)
        .collect();
    Ok(ExampleGradient {
        loss,
        weights,
        bias: buf.bias,
        lambda: buf.lambda,
    })
}

/// Trainer over a dataset whose prompt chains are already rendered.
pub struct Trainer {
    examples: Vec<Example>,
    config: TrainConfig,
    kernel: KernelParams,
}

impl Trainer {
    pub fn new(
        dataset: &[LabeledPair],
        knowledge: &BehaviorKnowledge,
        templates: &[PromptTemplate],
        config: &TrainConfig,
    ) -> Result<Self, TrainError> {
        config.validate().map_err(TrainError::Config)?;
        if dataset.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        validate_templates(templates).map_err(ModelError::from)?;
        if templates.len() != config.levels {
            return Err(TrainError::Config(format!(
                "{} templates supplied for {} levels",
                templates.len(),
                config.levels
            )));
        }
        let examples = dataset
            .iter()
            .map(|pair| {
                let chain = build_prompt_chain(&pair.query, &pair.item, knowledge, templates)
                    .map_err(ModelError::from)?;
                Ok(Example {
                    prompts: chain.levels,
                    label: pair.label,
                })
            })
            .collect::<Result<Vec<_>, TrainError>>()?;
        let kernel = KernelParams::new(config.kernel, 0.0, config.levels).map_err(ModelError::from)?;
        Ok(Self {
            examples,
            config: config.clone(),
            kernel,
        })
    }

    pub fn initial_state(&self) -> TrainState {
        TrainState {
            params: ToyScorerParams::zeros(self.config.dim),
            lambda: 0.0,
        }
    }

    /// Mean loss over the examples selected by `indices`.
    pub fn mean_loss(&self, state: &TrainState, indices: &[usize]) -> Result<EpochLoss, TrainError> {
        let mut acc = (0.0, 0.0, 0.0);
        for &i in indices {
            let l = example_step(&self.examples[i], self.config.dim, state, &self.kernel, self.config.alpha, None)?;
            acc.0 += l.main;
            acc.1 += l.auxi;
            acc.2 += l.total;
        }
        let n = indices.len().max(1) as f64;
        Ok(EpochLoss {
            epoch: 0,
            main: acc.0 / n,
            auxi: acc.1 / n,
            total: acc.2 / n,
        })
    }

    /// One gradient-descent step on the given batch.
    pub fn step(
        &self,
        state: &mut TrainState,
        batch: &[usize],
        rate: f64,
        lambda_rate: f64,
    ) -> Result<f64, TrainError> {
        let mut buf = GradientBuffer::new(self.config.dim);
        self.step_with(state, batch, rate, lambda_rate, &mut buf)
    }

    fn step_with(
        &self,
        state: &mut TrainState,
        batch: &[usize],
        rate: f64,
        lambda_rate: f64,
        buf: &mut GradientBuffer,
    ) -> Result<f64, TrainError> {
        let mut total = 0.0;
        for &i in batch {
            let l = example_step(
                &self.examples[i],
                self.config.dim,
                state,
                &self.kernel,
                self.config.alpha,
                Some(buf),
            )?;
            total += l.total;
        }
        buf.apply(state, rate, lambda_rate, batch.len());
        Ok(total / batch.len() as f64)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn run(&self) -> Result<(TrainState, Vec<EpochLoss>), TrainError> {
        let mut state = self.initial_state();
        let all: Vec<usize> = (0..self.examples.len()).collect();
        let mut trace = vec![self.mean_loss(&state, &all)?];
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut order = all.clone();
        let mut buf = GradientBuffer::new(self.config.dim);
        for epoch in 1..=self.config.epochs {
            order.shuffle(&mut rng);
            for (b, batch) in order.chunks(self.config.batch_size).enumerate() {
                let loss = self.step_with(
                    &mut state,
                    batch,
                    self.config.learning_rate,
                    self.config.lambda_rate(),
                    &mut buf,
                )?;
                if !loss.is_finite() || !state.lambda.is_finite() || !state.params.bias.is_finite() {
                    return Err(TrainError::Diverged {
                        epoch,
                        batch: b,
                        learning_rate: self.config.learning_rate,
                    });
                }
            }
            let mut e = self.mean_loss(&state, &all)?;
            if !e.total.is_finite() || !state.params.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: order.len().div_ceil(self.config.batch_size),
                    learning_rate: self.config.learning_rate,
                });
            }
            e.epoch = epoch;
            log::debug!("epoch {epoch}: total loss {:.6}", e.total);
            trace.push(e);
        }
        Ok((state, trace))
    }
}

/// Fits a bundle on `dataset` using the given knowledge snapshot.
pub fn train(
    dataset: &[LabeledPair],
    knowledge: &BehaviorKnowledge,
    templates: &[PromptTemplate],
    config: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    let trainer = Trainer::new(dataset, knowledge, templates, config)?;
    let (state, trace) = trainer.run()?;
    let bundle = ModelBundle::new(
        &state.params,
        state.lambda,
        templates.to_vec(),
        config.clone(),
        knowledge.version(),
    );
    Ok(TrainOutput { bundle, trace })
}
