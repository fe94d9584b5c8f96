//! Offline/online collaborative serving.
//!
//! A daily batch job scores known pairs into a versioned [`ScoreStore`].
//! The online [`ScoreService`] answers from that store and only runs the
//! model for pairs it has never seen. Each day's store and neighbor indexes
//! are installed together as one immutable [`Snapshot`].

mod http;
mod service;
mod store;

pub use http::{router, serve, SwapRequest};
pub use service::{ScoreService, ScoreSource, ServeResponse, ServingStats, Snapshot};
pub use store::{
    composite_key, offline_infer, read_pairs, OfflineOutcome, ScoreStore, SkippedPair, StoredScore,
};

use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("bad key: {0}")]
    BadKey(String),
    #[error("online scoring failed: {0}")]
    Online(#[source] ModelError),
    #[error("integrity check failed: {0}")]
    Integrity(String),
}
