//! Ablations and one-dimensional sweeps over a synthetic corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::Kernel;
use crate::behavior_index::{build_knowledge, BehaviorKnowledge, IndexConfig, DEFAULT_WINDOW_DAYS};
use crate::evaluation::{evaluate, MetricsReport, DEFAULT_THRESHOLD};
use crate::model::{RelevanceModel, TrainConfig};
use crate::prompt::default_templates;
use crate::training::{split_dataset, train, LabeledPair};

use super::synthetic::{SyntheticConfig, SyntheticCorpus};
use super::HarnessError;

/// Everything besides the corpus that determines a report. `train.seed`
/// drives both the dataset split and the per-epoch shuffles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub index: IndexConfig,
    pub window_days: usize,
    /// Train, validation and test fractions.
    pub split: (f64, f64, f64),
    pub threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            // Raw-count prompt features have squared norms in the thousands,
            // so the step size must be small for plain gradient descent to
            // stay stable. α = 1 lets the per-level losses speed up the
            // sparse attribute features.
            train: TrainConfig {
                alpha: 1.0,
                learning_rate: 0.0015,
                batch_size: 16,
                epochs: 8,
                ..TrainConfig::default()
            },
            index: IndexConfig::default(),
            window_days: DEFAULT_WINDOW_DAYS,
            split: (0.7, 0.1, 0.2),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Ablation variants. The progressive chain and the behavior neighbors can
/// each be switched off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    /// Every neighbor slot renders as `none`.
    WithoutNeighbors,
    /// Only the full-information prompt, trained with plain cross-entropy.
    WithoutProgressive,
    WithoutBoth,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::WithoutNeighbors,
        Variant::WithoutProgressive,
        Variant::WithoutBoth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::WithoutNeighbors => "without_neighbors",
            Variant::WithoutProgressive => "without_progressive",
            Variant::WithoutBoth => "without_both",
        }
    }

    fn uses_neighbors(self) -> bool {
        matches!(self, Variant::Full | Variant::WithoutProgressive)
    }

    fn uses_progressive(self) -> bool {
        matches!(self, Variant::Full | Variant::WithoutNeighbors)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| HarnessError::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dimension", content = "values", rename_all = "snake_case")]
pub enum Sweep {
    /// Neighbor list length; 0 means no neighbors at all.
    Neighbors(Vec<usize>),
    Kernel(Vec<Kernel>),
    Alpha(Vec<f64>),
}

impl Sweep {
    pub const NEIGHBOR_GRID: [usize; 4] = [0, 5, 10, 20];
    pub const ALPHA_GRID: [f64; 7] = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0];

    pub fn dimension(&self) -> &'static str {
        match self {
            Sweep::Neighbors(_) => "neighbors",
            Sweep::Kernel(_) => "kernel",
            Sweep::Alpha(_) => "alpha",
        }
    }

    /// The default grid for a dimension name.
    pub fn default_for(dimension: &str) -> Result<Self, HarnessError> {
        match dimension {
            "neighbors" => Ok(Sweep::Neighbors(Self::NEIGHBOR_GRID.to_vec())),
            "kernel" => Ok(Sweep::Kernel(Kernel::ALL.to_vec())),
            "alpha" => Ok(Sweep::Alpha(Self::ALPHA_GRID.to_vec())),
            other => Err(HarnessError::InvalidConfig(format!(
                "unknown sweep dimension {other:?}"
            ))),
        }
    }

    /// Parses comma-separated values for a dimension.
    pub fn parse(dimension: &str, values: &str) -> Result<Self, HarnessError> {
        let bad = |v: &str| HarnessError::InvalidSweepValue(format!("{dimension}={v}"));
        let items = values.split(',').map(str::trim).filter(|v| !v.is_empty());
        let sweep = match dimension {
            "neighbors" => Sweep::Neighbors(
                items
                    .map(|v| v.parse().map_err(|_| bad(v)))
                    .collect::<Result<_, _>>()?,
            ),
            "kernel" => Sweep::Kernel(
                items
                    .map(|v| v.parse().map_err(|_| bad(v)))
                    .collect::<Result<_, _>>()?,
            ),
            "alpha" => Sweep::Alpha(
                items
                    .map(|v| v.parse().map_err(|_| bad(v)))
                    .collect::<Result<_, _>>()?,
            ),
            _ => return Self::default_for(dimension),
        };
        Ok(sweep)
    }

    /// `(variant name, plot value)` per sweep point, in request order.
    fn points(&self) -> Result<Vec<(String, serde_json::Value)>, HarnessError> {
        let points: Vec<(String, serde_json::Value)> = match self {
            Sweep::Neighbors(v) => v
                .iter()
                .map(|k| (format!("neighbors={k}"), serde_json::json!(k)))
                .collect(),
            Sweep::Kernel(v) => v
                .iter()
                .map(|k| (format!("kernel={}", k.name()), serde_json::json!(k.name())))
                .collect(),
            Sweep::Alpha(v) => {
                if let Some(a) = v.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
                    return Err(HarnessError::InvalidSweepValue(format!("alpha={a}")));
                }
                v.iter()
                    .map(|a| (format!("alpha={a}"), serde_json::json!(a)))
                    .collect()
            }
        };
        if points.is_empty() {
            return Err(HarnessError::InvalidSweepValue(format!(
                "no {} values given",
                self.dimension()
            )));
        }
        check_unique(points.iter().map(|p| p.0.as_str()))?;
        Ok(points)
    }
}

/// One row of the plot table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub variant: String,
    /// Sweep value, or null for ablations.
    pub value: serde_json::Value,
    pub auc: f64,
    pub f1: f64,
    pub fnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// `ablation` or `sweep`.
    pub experiment: String,
    /// Sweep dimension; absent for ablations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<String>,
    pub seed: u64,
    pub corpus: SyntheticConfig,
    pub config: ExperimentConfig,
    pub variants: BTreeMap<String, MetricsReport>,
    /// Rows in request order, ready for plotting.
    pub table: Vec<PlotRow>,
}

impl ExperimentReport {
    pub fn auc(&self, variant: &str) -> Option<f64> {
        self.variants.get(variant).map(|m| m.auc)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn check_unique<'a>(names: impl Iterator<Item = &'a str>) -> Result<(), HarnessError> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(HarnessError::DuplicateVariant(n.to_owned()));
        }
    }
    Ok(())
}

/// The corpus after the shared preprocessing: knowledge for the base index
/// config and the fixed split.
struct Prepared {
    knowledge: BehaviorKnowledge,
    train: Vec<LabeledPair>,
    test: Vec<LabeledPair>,
}

fn knowledge_for(
    corpus: &SyntheticCorpus,
    config: &ExperimentConfig,
    index: &IndexConfig,
) -> Result<BehaviorKnowledge, HarnessError> {
    let (knowledge, _) = build_knowledge(
        &corpus.logs,
        corpus.attributes.clone(),
        index,
        corpus.version(),
        config.window_days,
    )?;
    Ok(knowledge)
}

fn prepare(corpus: &SyntheticCorpus, config: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    let knowledge = knowledge_for(corpus, config, &config.index)?;
    let (train, _valid, test) = split_dataset(&corpus.labeled, config.split, config.train.seed)?;
    Ok(Prepared {
        knowledge,
        train,
        test,
    })
}

/// Trains on the training split and evaluates on the test split, both with
/// the same knowledge.
fn train_and_evaluate(
    prepared: &Prepared,
    knowledge: &BehaviorKnowledge,
    train_config: &TrainConfig,
    threshold: f64,
) -> Result<MetricsReport, HarnessError> {
    let templates = default_templates(train_config.levels)
        .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let out = train(&prepared.train, knowledge, &templates, train_config)?;
    let model = RelevanceModel::from_bundle(&out.bundle)?;
    Ok(evaluate(&model, &prepared.test, knowledge, threshold)?)
}

fn assemble(
    experiment: &str,
    dimension: Option<&str>,
    corpus: &SyntheticCorpus,
    config: &ExperimentConfig,
    points: Vec<(String, serde_json::Value)>,
    results: Vec<Result<MetricsReport, HarnessError>>,
) -> Result<ExperimentReport, HarnessError> {
    let mut variants = BTreeMap::new();
    let mut table = Vec::with_capacity(points.len());
    for ((name, value), result) in points.into_iter().zip(results) {
        let metrics = result?;
        table.push(PlotRow {
            variant: name.clone(),
            value,
            auc: metrics.auc,
            f1: metrics.f1,
            fnr: metrics.fnr,
        });
        variants.insert(name, metrics);
    }
    Ok(ExperimentReport {
        experiment: experiment.to_owned(),
        dimension: dimension.map(str::to_owned),
        seed: config.train.seed,
        corpus: corpus.config.clone(),
        config: config.clone(),
        variants,
        table,
    })
}

/// Trains and evaluates each variant on the same split with the same seed.
/// Variants run in parallel.
pub fn run_ablations(
    corpus: &SyntheticCorpus,
    config: &ExperimentConfig,
    variants: &[Variant],
) -> Result<ExperimentReport, HarnessError> {
    if variants.is_empty() {
        return Err(HarnessError::InvalidConfig("no variants requested".into()));
    }
    check_unique(variants.iter().map(|v| v.name()))?;
    let prepared = prepare(corpus, config)?;
    let without = prepared.knowledge.without_neighbors();

    let results: Vec<_> = variants
        .par_iter()
        .map(|v| {
            let knowledge = if v.uses_neighbors() {
                &prepared.knowledge
            } else {
                &without
            };
            let mut train_config = config.train.clone();
            if !v.uses_progressive() {
                train_config.levels = 1;
                train_config.alpha = 0.0;
            }
            log::info!("training variant {v}");
            train_and_evaluate(&prepared, knowledge, &train_config, config.threshold)
        })
        .collect();
    let points = variants
        .iter()
        .map(|v| (v.name().to_owned(), serde_json::Value::Null))
        .collect();
    assemble("ablation", None, corpus, config, points, results)
}

/// One train and evaluation per sweep value; everything else comes from
/// `config`.
pub fn run_sweeps(
    corpus: &SyntheticCorpus,
    config: &ExperimentConfig,
    sweep: &Sweep,
) -> Result<ExperimentReport, HarnessError> {
    let points = sweep.points()?;
    let prepared = prepare(corpus, config)?;

    let results: Vec<_> = match sweep {
        Sweep::Neighbors(ks) => ks
            .par_iter()
            .map(|&k| {
                let knowledge = if k == 0 {
                    prepared.knowledge.without_neighbors()
                } else {
                    let index = IndexConfig {
                        top_k: k,
                        ..config.index.clone()
                    };
                    knowledge_for(corpus, config, &index)?
                };
                train_and_evaluate(&prepared, &knowledge, &config.train, config.threshold)
            })
            .collect(),
        Sweep::Kernel(kernels) => kernels
            .par_iter()
            .map(|&kernel| {
                let train_config = TrainConfig {
                    kernel,
                    ..config.train.clone()
                };
                train_and_evaluate(&prepared, &prepared.knowledge, &train_config, config.threshold)
            })
            .collect(),
        Sweep::Alpha(alphas) => alphas
            .par_iter()
            .map(|&alpha| {
                let train_config = TrainConfig {
                    alpha,
                    ..config.train.clone()
                };
                train_and_evaluate(&prepared, &prepared.knowledge, &train_config, config.threshold)
            })
            .collect(),
    };
    assemble("sweep", Some(sweep.dimension()), corpus, config, points, results)
}
