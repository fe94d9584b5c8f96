use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::behavior_index::BehaviorKnowledge;
use crate::model::RelevanceModel;

use super::store::{composite_key, ScoreStore};
use super::ServeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    Offline,
    Online,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServeResponse {
    pub score: f64,
    pub source: ScoreSource,
    pub model_version: String,
}

/// Request accounting. A failed online call is still an online call, so
/// `offline_hits + online_calls == requests` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ServingStats {
    pub requests: u64,
    pub offline_hits: u64,
    pub online_calls: u64,
    pub online_failures: u64,
    pub hit_rate: f64,
}

impl ServingStats {
    fn record(&mut self, source: ScoreSource, failed: bool) {
        self.requests += 1;
        match source {
            ScoreSource::Offline => self.offline_hits += 1,
            ScoreSource::Online => {
                self.online_calls += 1;
                if failed {
                    self.online_failures += 1;
                }
            }
        }
        self.hit_rate = self.offline_hits as f64 / self.requests as f64;
    }
}

/// One day's immutable serving state.
#[derive(Debug)]
pub struct Snapshot {
    pub store: ScoreStore,
    pub knowledge: BehaviorKnowledge,
}

impl Snapshot {
    /// A snapshot is consistent when the store was computed from the same
    /// knowledge version it is served with.
    pub fn new(store: ScoreStore, knowledge: BehaviorKnowledge) -> Result<Self, ServeError> {
        store.validate()?;
        if store.version != knowledge.version() {
            return Err(ServeError::Integrity(format!(
                "store version {} does not match index version {}",
                store.version,
                knowledge.version()
            )));
        }
        Ok(Self { store, knowledge })
    }

    pub fn load(store_path: &Path, index_dir: &Path) -> Result<Self, ServeError> {
        let store = ScoreStore::load(store_path)?;
        let knowledge =
            BehaviorKnowledge::load(index_dir).map_err(|e| ServeError::Integrity(e.to_string()))?;
        Self::new(store, knowledge)
    }

    pub fn version(&self) -> &str {
        &self.store.version
    }
}

/// Answers from the precomputed store and falls back to live scoring on a
/// miss.
pub struct ScoreService {
    snapshot: RwLock<Arc<Snapshot>>,
    online: RelevanceModel,
    stats: Mutex<ServingStats>,
}

impl ScoreService {
    pub fn new(snapshot: Snapshot, online: RelevanceModel) -> Self {
        Self {
            snapshot: RwLock::new(Arc::new(snapshot)),
            online,
            stats: Mutex::new(ServingStats::default()),
        }
    }

    /// The snapshot new requests will see.
    pub fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn stats(&self) -> ServingStats {
        *self.stats.lock().expect("stats lock")
    }

    pub fn online_model(&self) -> &RelevanceModel {
        &self.online
    }

    pub fn serve_score(&self, query: &str, item: &str) -> Result<ServeResponse, ServeError> {
        let key = composite_key(query, item)?;
        // everything below reads this one snapshot
        let snapshot = self.current();
        if let Some(hit) = snapshot.store.entries.get(&key) {
            let response = ServeResponse {
                score: hit.score,
                source: ScoreSource::Offline,
                model_version: hit.model_version.clone(),
            };
            self.stats.lock().expect("stats lock").record(ScoreSource::Offline, false);
            return Ok(response);
        }
        let result = self.online.score_pair(&snapshot.knowledge, query, item);
        self.stats
            .lock()
            .expect("stats lock")
            .record(ScoreSource::Online, result.is_err());
        let scored = result.map_err(ServeError::Online)?;
        Ok(ServeResponse {
            score: scored.score,
            source: ScoreSource::Online,
            model_version: self.online.model_version.clone(),
        })
    }

    /// Installs a new snapshot. Requests already holding the old one finish
    /// against it.
    pub fn swap_snapshot(&self, snapshot: Snapshot) -> String {
        let version = snapshot.version().to_owned();
        *self.snapshot.write().expect("snapshot lock") = Arc::new(snapshot);
        log::info!("serving snapshot {version}");
        version
    }

    /// Validates the new artifacts, then swaps. On any failure the current
    /// snapshot stays in place.
    pub fn swap_store(
        &self,
        store: ScoreStore,
        knowledge: BehaviorKnowledge,
    ) -> Result<String, ServeError> {
        Ok(self.swap_snapshot(Snapshot::new(store, knowledge)?))
    }

    pub fn swap_from_paths(&self, store_path: &Path, index_dir: &Path) -> Result<String, ServeError> {
        Ok(self.swap_snapshot(Snapshot::load(store_path, index_dir)?))
    }
}
