//! HTTP client for an external scoring model.
//!
//! Wire protocol: `POST <endpoint>/v1/score` with `{"prompt": "..."}`,
//! answered by `{"p_relevant": <number in [0, 1]>}`. No retries happen here.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{PromptScorer, ScoreDistribution, ScorerError};

pub const SCORE_PATH: &str = "/v1/score";

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub prompt: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub p_relevant: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct RemoteScorer {
    url: String,
    client: reqwest::blocking::Client,
}

impl RemoteScorer {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, ScorerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ScorerError::Transport(e.to_string()))?;
        Ok(Self {
            url: format!("{}{SCORE_PATH}", endpoint.trim_end_matches('/')),
            client,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

/// Validates the `p_relevant` field of a response body.
pub fn parse_score_response(body: &[u8]) -> Result<ScoreDistribution, ScorerError> {
    let parsed: ScoreResponse = serde_json::from_slice(body)
        .map_err(|e| ScorerError::InvalidResponse(e.to_string()))?;
    let p = parsed
        .p_relevant
        .as_f64()
        .ok_or_else(|| ScorerError::InvalidResponse(format!("p_relevant is {}", parsed.p_relevant)))?;
    ScoreDistribution::new(p)
}

pub fn remote_score(scorer: &RemoteScorer, prompt: &str) -> Result<ScoreDistribution, ScorerError> {
    let response = scorer
        .client
        .post(&scorer.url)
        .json(&ScoreRequest {
            prompt: prompt.to_owned(),
        })
        .send()
        .map_err(|e| {
            if e.is_timeout() {
                ScorerError::Timeout
            } else {
                ScorerError::Transport(e.to_string())
            }
        })?;
    let status = response.status();
    if !status.is_success() {
        return Err(ScorerError::Status(status.as_u16()));
    }
    let body = response.bytes().map_err(|e| {
        if e.is_timeout() {
            ScorerError::Timeout
        } else {
            ScorerError::Transport(e.to_string())
        }
    })?;
    parse_score_response(&body)
}

impl PromptScorer for RemoteScorer {
    fn score(&self, prompt: &str) -> Result<ScoreDistribution, ScorerError> {
        remote_score(self, prompt)
    }
}
