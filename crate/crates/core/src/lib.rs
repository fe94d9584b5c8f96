//! Query-item relevance scoring with behavior-neighbor retrieval and
//! progressive prompt aggregation.
//!
//! The pipeline runs in daily batches: [`behavior_index`] mines neighbor
//! indexes from exposure logs, [`prompt`] renders a chain of prompts per
//! pair, [`scorer`] turns each prompt into a relevance probability and
//! [`aggregation`] combines them with learnable kernel weights. [`training`]
//! fits the scorer and kernel jointly, [`evaluation`] reports AUC, F1 and
//! FNR, and [`serving`] answers requests from a precomputed store with a
//! live fallback. [`harness`] runs ablations and sweeps on synthetic data.

pub mod aggregation;
pub mod behavior_index;
pub mod evaluation;
pub mod harness;
pub mod model;
pub mod prompt;
pub mod scorer;
pub mod serving;
pub mod training;
