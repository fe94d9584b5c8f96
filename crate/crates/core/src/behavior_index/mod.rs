//! Daily behavior-neighbor indexes mined from search logs.
//!
//! Exposure logs are aggregated per `(query, item)` pair over a window of
//! days. Pairs with enough exposure and a high enough click-through rate
//! become neighbors of each other: items for the query-side index, queries
//! for the item-side index. Each list keeps the top-k partners by ctr.
//!
//! ```text
//! logs.jsonl ─▶ aggregate_logs ─▶ ExposureStats ─▶ build_neighbor_indexes ─▶ (N^q, N^i)
//! attrs.jsonl ─────────────────────────────────▶ AttributeTable
//! ```

mod attributes;
mod index;
mod logs;
mod text;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use attributes::{AttributeLoadReport, AttributeSet, AttributeTable};
pub use index::{build_neighbor_indexes, neighbor_order, IndexConfig, Neighbor, NeighborIndex, Side};
pub use logs::{
    aggregate_logs, is_date_label, parse_log_line, read_logs, recent_window, ExposureStats,
    LineError, LogIngest, SearchLogRecord,
};
pub use text::{normalize_key, normalize_text, COMPOSITE_SEPARATOR};

/// Default look-back window, in distinct log days.
pub const DEFAULT_WINDOW_DAYS: usize = 30;

pub const QUERY_INDEX_FILE: &str = "query_index.json";
pub const ITEM_INDEX_FILE: &str = "item_index.json";
pub const ATTRIBUTES_FILE: &str = "attributes.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("clicks exceed pv ({clicks} > {pv})")]
    ClicksExceedPv { clicks: u64, pv: u64 },
    #[error("key is empty after normalization")]
    EmptyKey,
    #[error("key {0:?} contains a control character")]
    ControlCharacter(String),
    #[error("invalid date label {0:?}, expected YYYY-MM-DD")]
    BadDate(String),
    #[error("invalid index configuration: {0}")]
    InvalidConfig(String),
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("index sides disagree on version: {query} vs {item}")]
    VersionMismatch { query: String, item: String },
    #[error("serialization: {0}")]
    Serde(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IndexError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IndexError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Build parameters recorded next to the index files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub version: String,
    pub config: IndexConfig,
    pub window: Vec<String>,
    pub query_keys: usize,
    pub item_keys: usize,
}

/// Everything the prompt builder draws on for one day: both neighbor
/// indexes and the attribute table.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorKnowledge {
    pub query_index: NeighborIndex,
    pub item_index: NeighborIndex,
    pub attributes: AttributeTable,
}

impl BehaviorKnowledge {
    pub fn new(
        query_index: NeighborIndex,
        item_index: NeighborIndex,
        attributes: AttributeTable,
    ) -> Result<Self, IndexError> {
        if query_index.side != Side::Query || item_index.side != Side::Item {
            return Err(IndexError::Corrupt("index sides swapped".into()));
        }
        if query_index.version != item_index.version {
            return Err(IndexError::VersionMismatch {
                query: query_index.version,
                item: item_index.version,
            });
        }
        Ok(Self {
            query_index,
            item_index,
            attributes,
        })
    }

    pub fn version(&self) -> &str {
        &self.query_index.version
    }

    /// Same version and attributes, but every neighbor lookup comes back
    /// empty.
    pub fn without_neighbors(&self) -> Self {
        Self {
            query_index: NeighborIndex::empty(Side::Query, self.version()),
            item_index: NeighborIndex::empty(Side::Item, self.version()),
            attributes: self.attributes.clone(),
        }
    }

    pub fn neighbors(&self, side: Side, key: &str) -> &[Neighbor] {
        match side {
            Side::Query => self.query_index.lookup(key),
            Side::Item => self.item_index.lookup(key),
        }
    }

    /// Writes both indexes, the attribute table and a manifest into `dir`.
    pub fn save(&self, dir: &Path, manifest: &IndexManifest) -> Result<(), IndexError> {
        fs::create_dir_all(dir).map_err(|e| IndexError::io(dir, e))?;
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| IndexError::io(&path, e))
        };
        write(QUERY_INDEX_FILE, self.query_index.to_json()?)?;
        write(ITEM_INDEX_FILE, self.item_index.to_json()?)?;
        write(ATTRIBUTES_FILE, to_json_line(&self.attributes)?)?;
        write(MANIFEST_FILE, to_json_line(manifest)?)?;
        Ok(())
    }

    /// Loads and validates an index directory written by [`save`](Self::save).
    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|e| IndexError::io(&path, e))
        };
        let query_index = NeighborIndex::from_json(&read(QUERY_INDEX_FILE)?)?;
        let item_index = NeighborIndex::from_json(&read(ITEM_INDEX_FILE)?)?;
        let attributes: AttributeTable = serde_json::from_str(&read(ATTRIBUTES_FILE)?)
            .map_err(|e| IndexError::Serde(e.to_string()))?;
        Self::new(query_index, item_index, attributes)
    }
}

fn to_json_line<T: Serialize>(value: &T) -> Result<String, IndexError> {
    let mut s = serde_json::to_string(value).map_err(|e| IndexError::Serde(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// The full daily build: window selection, aggregation and index
/// construction. `window_days` picks the most recent distinct days present
/// in the records.
pub fn build_knowledge(
    records: &[SearchLogRecord],
    attributes: AttributeTable,
    config: &IndexConfig,
    version: &str,
    window_days: usize,
) -> Result<(BehaviorKnowledge, IndexManifest), IndexError> {
    let window = recent_window(records, window_days);
    let stats = aggregate_logs(records, &window);
    let (query_index, item_index) = build_neighbor_indexes(&stats, config, version)?;
    let manifest = IndexManifest {
        version: version.to_owned(),
        config: config.clone(),
        window: window.into_iter().collect(),
        query_keys: query_index.entries.len(),
        item_keys: item_index.entries.len(),
    };
    Ok((
        BehaviorKnowledge::new(query_index, item_index, attributes)?,
        manifest,
    ))
}
