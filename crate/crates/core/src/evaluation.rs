//! AUC, F1 and false-negative rate over scored pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior_index::BehaviorKnowledge;
use crate::model::{ModelError, RelevanceModel};
use crate::training::LabeledPair;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("{metric} is undefined: {reason}")]
    Undefined {
        metric: &'static str,
        reason: &'static str,
    },
    #[error("{scores} scores for {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no pairs to evaluate")]
    Empty,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no pairs to evaluate")]
    EmptyDataset,
    #[error(transparent)]
    Model(#[from] ModelError),
    /// A metric could not be computed; whatever could be is in `partial`.
    #[error("{source}")]
    UndefinedMetric {
        source: MetricError,
        partial: Box<PartialReport>,
    },
}

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<(), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Rank-statistic AUC with average ranks over ties, i.e. the probability a
/// random positive outscores a random negative with ties counted as 1/2.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::Undefined {
            metric: "auc",
            reason: "needs both positive and negative labels",
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (0-based) share the average 1-based rank
        let avg_rank = (start + end + 1) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        pos_rank_sum += avg_rank * positives as f64;
        start = end;
    }
    let n_pos = n_pos as f64;
    let u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Scores at or above `threshold` are predicted positive.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Confusion, MetricError> {
    check_lengths(scores, labels)?;
    let mut c = Confusion::default();
    for (s, y) in scores.iter().zip(labels) {
        match (*s >= threshold, *y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// F1 of the positive class; 0 when precision and recall are both 0.
pub fn f1(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64, MetricError> {
    let c = confusion(scores, labels, threshold)?;
    let precision = if c.tp + c.fp > 0 {
        c.tp as f64 / (c.tp + c.fp) as f64
    } else {
        0.0
    };
    let recall = if c.tp + c.fn_ > 0 {
        c.tp as f64 / (c.tp + c.fn_) as f64
    } else {
        0.0
    };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

pub fn fnr(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64, MetricError> {
    let c = confusion(scores, labels, threshold)?;
    if c.tp + c.fn_ == 0 {
        return Err(MetricError::Undefined {
            metric: "fnr",
            reason: "needs at least one positive label",
        });
    }
    Ok(c.fn_ as f64 / (c.tp + c.fn_) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub f1: f64,
    pub fnr: f64,
    pub threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Metrics that were computable when the full report was not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialReport {
    pub auc: Option<f64>,
    pub f1: Option<f64>,
    pub fnr: Option<f64>,
    pub threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// All three metrics from collected scores.
pub fn metrics_from_scores(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<MetricsReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let auc_v = auc(scores, labels);
    let f1_v = f1(scores, labels, threshold);
    let fnr_v = fnr(scores, labels, threshold);
    match (auc_v, f1_v, fnr_v) {
        (Ok(auc), Ok(f1), Ok(fnr)) => Ok(MetricsReport {
            auc,
            f1,
            fnr,
            threshold,
            n_pos,
            n_neg: labels.len() - n_pos,
        }),
        (a, f, r) => {
            let source = [&a, &f, &r]
                .into_iter()
                .find_map(|m| m.as_ref().err().cloned())
                .expect("at least one metric failed");
            Err(EvalError::UndefinedMetric {
                source,
                partial: Box::new(PartialReport {
                    auc: a.ok(),
                    f1: f.ok(),
                    fnr: r.ok(),
                    threshold,
                    n_pos,
                    n_neg: labels.len() - n_pos,
                }),
            })
        }
    }
}

/// Scores each pair in parallel; output order matches `pairs`.
pub fn score_pairs(
    model: &RelevanceModel,
    pairs: &[LabeledPair],
    knowledge: &BehaviorKnowledge,
) -> Result<Vec<f64>, ModelError> {
    pairs
        .par_iter()
        .map(|p| model.score_pair(knowledge, &p.query, &p.item).map(|s| s.score))
        .collect()
}

/// Scores every pair through the full chain and computes the metric suite.
pub fn evaluate(
    model: &RelevanceModel,
    pairs: &[LabeledPair],
    knowledge: &BehaviorKnowledge,
    threshold: f64,
) -> Result<MetricsReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let scores = score_pairs(model, pairs, knowledge)?;
    let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    metrics_from_scores(&scores, &labels, threshold)
}
