//! Precomputed score store and the offline batch job that fills it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior_index::{is_date_label, normalize_key, BehaviorKnowledge, COMPOSITE_SEPARATOR};
use crate::model::RelevanceModel;

use super::ServeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredScore {
    pub score: f64,
    pub model_version: String,
    pub day: String,
}

/// `normalize(query) + U+0001 + normalize(item)`.
pub fn composite_key(query: &str, item: &str) -> Result<String, ServeError> {
    let q = normalize_key(query).map_err(|e| ServeError::BadKey(e.to_string()))?;
    let i = normalize_key(item).map_err(|e| ServeError::BadKey(e.to_string()))?;
    let mut key = String::with_capacity(q.len() + i.len() + 1);
    key.push_str(&q);
    key.push(COMPOSITE_SEPARATOR);
    key.push_str(&i);
    Ok(key)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreStore {
    pub version: String,
    pub entries: BTreeMap<String, StoredScore>,
}

impl ScoreStore {
    pub fn new(version: impl Into<String>) -> Self {
        Self {
            version: version.into(),
            entries: BTreeMap::new(),
        }
    }

    /// Exact match on the normalized composite key.
    pub fn lookup(&self, query: &str, item: &str) -> Option<&StoredScore> {
        let key = composite_key(query, item).ok()?;
        self.entries.get(&key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> Result<(), ServeError> {
        if !is_date_label(&self.version) {
            return Err(ServeError::Integrity(format!(
                "store version {:?} is not a date label",
                self.version
            )));
        }
        for (key, entry) in &self.entries {
            let well_formed = key
                .split_once(COMPOSITE_SEPARATOR)
                .is_some_and(|(q, i)| {
                    normalize_key(q).is_ok_and(|n| n == q) && normalize_key(i).is_ok_and(|n| n == i)
                });
            if !well_formed {
                return Err(ServeError::Integrity(format!("malformed store key {key:?}")));
            }
            if !(0.0..=1.0).contains(&entry.score) {
                return Err(ServeError::Integrity(format!(
                    "score {} out of range for {key:?}",
                    entry.score
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("store serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ServeError> {
        let store: Self =
            serde_json::from_str(text).map_err(|e| ServeError::Integrity(e.to_string()))?;
        store.validate()?;
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), ServeError> {
        fs::write(path, self.to_json())
            .map_err(|e| ServeError::Integrity(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ServeError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ServeError::Integrity(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Deserialize)]
struct PairLine {
    query: String,
    item: String,
}

/// Reads JSON-lines `{query, item, ...}`; extra fields such as `label` are
/// ignored.
pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| format!("line {}: {e}", n + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PairLine =
            serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", n + 1))?;
        pairs.push((p.query, p.item));
    }
    Ok(pairs)
}

/// A pair the offline job could not score.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPair {
    pub query: String,
    pub item: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct OfflineOutcome {
    pub store: ScoreStore,
    pub skipped: Vec<SkippedPair>,
}

/// Scores every distinct normalized pair through the full chain. Pairs that
/// fail are logged and left out; the store is still produced and carries
/// the knowledge snapshot's version.
pub fn offline_infer(
    model: &RelevanceModel,
    pairs: &[(String, String)],
    knowledge: &BehaviorKnowledge,
) -> OfflineOutcome {
    let mut skipped = Vec::new();
    let mut unique: BTreeSet<(String, String, String)> = BTreeSet::new();
    for (q, i) in pairs {
        match composite_key(q, i) {
            Ok(key) => {
                let (nq, ni) = key.split_once(COMPOSITE_SEPARATOR).expect("composite key");
                unique.insert((key.clone(), nq.to_owned(), ni.to_owned()));
            }
            Err(e) => skipped.push(SkippedPair {
                query: q.clone(),
                item: i.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let unique: Vec<_> = unique.into_iter().collect();
    let scored: Vec<_> = unique
        .par_iter()
        .map(|(_, q, i)| model.score_pair(knowledge, q, i))
        .collect();

    let version = knowledge.version().to_owned();
    let mut store = ScoreStore::new(version.clone());
    for ((key, q, i), result) in unique.into_iter().zip(scored) {
        match result {
            Ok(s) => {
                store.entries.insert(
                    key,
                    StoredScore {
                        score: s.score,
                        model_version: model.model_version.clone(),
                        day: version.clone(),
                    },
                );
            }
            Err(e) => {
                log::warn!("offline scoring failed for ({q:?}, {i:?}): {e}");
                skipped.push(SkippedPair {
                    query: q,
                    item: i,
                    reason: e.to_string(),
                });
            }
        }
    }
    OfflineOutcome { store, skipped }
}
