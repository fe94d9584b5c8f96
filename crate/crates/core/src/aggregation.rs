//! Kernel-weighted aggregation of per-level probabilities and the hybrid
//! training loss.
//!
//! Level `l` of an `L`-level chain has attenuation `Δ_l = L - l`, so the last
//! and most informative prompt is attenuated least. Weights are a softmax
//! over `-λ·φ(Δ_l)`, where `φ` is the kernel profile:
//!
//! | kernel        | φ(Δ)        |
//! |---------------|-------------|
//! | exponential   | Δ           |
//! | gaussian      | Δ²          |
//! | logarithmic   | ln(1 + Δ)   |
//! | mean          | 0           |
//!
//! The exponential kernel gives `w_l ∝ exp(-λΔ_l)`. Weights are normalized
//! onto the simplex so the aggregate stays a probability.

use serde::{Deserialize, Serialize};

/// Probability floor/ceiling applied inside the cross-entropy.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AggregationError {
    #[error("expected {expected} per-level probabilities, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("prompt count must be at least 1")]
    NoLevels,
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("non-finite kernel parameter")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Exponential,
    Mean,
    Gaussian,
    Logarithmic,
}

impl Kernel {
    pub const ALL: [Kernel; 4] = [
        Kernel::Exponential,
        Kernel::Mean,
        Kernel::Gaussian,
        Kernel::Logarithmic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Exponential => "exponential",
            Kernel::Mean => "mean",
            Kernel::Gaussian => "gaussian",
            Kernel::Logarithmic => "logarithmic",
        }
    }

    pub fn profile(self, delta: f64) -> f64 {
        match self {
            Kernel::Exponential => delta,
            Kernel::Mean => 0.0,
            Kernel::Gaussian => delta * delta,
            Kernel::Logarithmic => delta.ln_1p(),
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown kernel {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub kernel: Kernel,
    pub lambda: f64,
    pub levels: usize,
}

impl KernelParams {
    pub fn new(kernel: Kernel, lambda: f64, levels: usize) -> Result<Self, AggregationError> {
        if levels == 0 {
            return Err(AggregationError::NoLevels);
        }
        if !lambda.is_finite() {
            return Err(AggregationError::NonFinite);
        }
        Ok(Self {
            kernel,
            lambda,
            levels,
        })
    }

    /// `Δ_l = L - l` for `l = 1..=L`.
    pub fn deltas(&self) -> Vec<f64> {
        (1..=self.levels).map(|l| (self.levels - l) as f64).collect()
    }

    fn profiles(&self) -> Vec<f64> {
        self.deltas().into_iter().map(|d| self.kernel.profile(d)).collect()
    }
}

/// Softmax of `scores` with max subtraction.
fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn kernel_weights(params: &KernelParams) -> Vec<f64> {
    let scores: Vec<f64> = params.profiles().iter().map(|p| -params.lambda * p).collect();
    softmax(&scores)
}

/// `dw_l/dλ = w_l (Σ_m w_m φ_m - φ_l)`.
pub fn kernel_weight_derivatives(params: &KernelParams, weights: &[f64]) -> Vec<f64> {
    let profiles = params.profiles();
    let mean: f64 = weights.iter().zip(&profiles).map(|(w, p)| w * p).sum();
    weights
        .iter()
        .zip(&profiles)
        .map(|(w, p)| w * (mean - p))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateOutput {
    pub weights: Vec<f64>,
    pub overall_p: f64,
}

fn check_probabilities(ps: &[f64]) -> Result<(), AggregationError> {
    match ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(p) => Err(AggregationError::BadProbability(*p)),
        None => Ok(()),
    }
}

pub fn aggregate(per_prompt: &[f64], weights: &[f64]) -> Result<AggregateOutput, AggregationError> {
    if per_prompt.len() != weights.len() {
        return Err(AggregationError::LengthMismatch {
            expected: weights.len(),
            actual: per_prompt.len(),
        });
    }
    check_probabilities(per_prompt)?;
    let overall: f64 = per_prompt.iter().zip(weights).map(|(p, w)| p * w).sum();
    Ok(AggregateOutput {
        weights: weights.to_vec(),
        // rounding can push a convex combination a hair outside [0, 1]
        overall_p: overall.clamp(0.0, 1.0),
    })
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Binary cross-entropy with the probability clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn cross_entropy(p: f64, label: u8) -> f64 {
    let p = clamp_prob(p);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// `d CE / d p`, evaluated at the clamped probability. Outside the clamp
/// range this is the one-sided limit rather than zero, so a saturated wrong
/// prediction still receives a gradient.
pub fn cross_entropy_derivative(p: f64, label: u8) -> f64 {
    let p = clamp_prob(p);
    if label == 1 {
        -1.0 / p
    } else {
        1.0 / (1.0 - p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub main: f64,
    pub auxi: f64,
    pub total: f64,
    pub alpha: f64,
}

/// `main = CE(overall, y)`, `auxi = Σ_l CE(p_l, y)`, `total = main + α·auxi`.
pub fn hybrid_loss(overall_p: f64, per_prompt: &[f64], label: u8, alpha: f64) -> LossBreakdown {
    let main = cross_entropy(overall_p, label);
    let auxi: f64 = per_prompt.iter().map(|p| cross_entropy(*p, label)).sum();
    LossBreakdown {
        main,
        auxi,
        total: main + alpha * auxi,
        alpha,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradients {
    pub loss: LossBreakdown,
    pub output: AggregateOutput,
    pub d_lambda: f64,
    pub d_per_prompt: Vec<f64>,
}

/// Forward pass plus exact gradients of the hybrid loss with respect to λ
/// and every per-level probability.
pub fn loss_gradients(
    per_prompt: &[f64],
    params: &KernelParams,
    label: u8,
    alpha: f64,
) -> Result<LossGradients, AggregationError> {
    let weights = kernel_weights(params);
    let output = aggregate(per_prompt, &weights)?;
    let loss = hybrid_loss(output.overall_p, per_prompt, label, alpha);

    let d_main = cross_entropy_derivative(output.overall_p, label);
    let dw = kernel_weight_derivatives(params, &weights);
    let d_lambda = d_main * per_prompt.iter().zip(&dw).map(|(p, d)| p * d).sum::<f64>();
    let d_per_prompt = per_prompt
        .iter()
        .zip(&weights)
        .map(|(p, w)| d_main * w + alpha * cross_entropy_derivative(*p, label))
        .collect();

    Ok(LossGradients {
        loss,
        output,
        d_lambda,
        d_per_prompt,
    })
}
