//! Dual behavior-neighbor indexes built from high-confidence exposure stats.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::logs::{is_date_label, ExposureStats};
use super::text::normalize_text;
use super::IndexError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Query,
    Item,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Query => "query",
            Side::Item => "item",
        }
    }
}

/// A partner reached through click behavior: an item for a query key, a
/// query for an item key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub partner: String,
    pub ctr: f64,
}

/// Ordering inside a neighbor list: ctr descending, partner ascending.
pub fn neighbor_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.ctr
        .partial_cmp(&a.ctr)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.partner.cmp(&b.partner))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborIndex {
    pub side: Side,
    pub version: String,
    pub entries: BTreeMap<String, Vec<Neighbor>>,
}

impl NeighborIndex {
    pub fn empty(side: Side, version: impl Into<String>) -> Self {
        Self {
            side,
            version: version.into(),
            entries: BTreeMap::new(),
        }
    }

    /// The stored list for `key`, or an empty slice. The key is normalized
    /// before lookup.
    pub fn lookup(&self, key: &str) -> &[Neighbor] {
        let key = normalize_text(key);
        self.entries.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Total number of `(key, partner)` edges.
    pub fn edge_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn to_json(&self) -> Result<String, IndexError> {
        let mut s = serde_json::to_string(self).map_err(|e| IndexError::Serde(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and validates an index document.
    pub fn from_json(text: &str) -> Result<Self, IndexError> {
        let index: Self =
            serde_json::from_str(text).map_err(|e| IndexError::Serde(e.to_string()))?;
        index.validate()?;
        Ok(index)
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        if !is_date_label(&self.version) {
            return Err(IndexError::BadDate(self.version.clone()));
        }
        for (key, list) in &self.entries {
            let ordered = list
                .windows(2)
                .all(|w| neighbor_order(&w[0], &w[1]) == Ordering::Less);
            let in_range = list.iter().all(|n| (0.0..=1.0).contains(&n.ctr));
            if !ordered || !in_range {
                return Err(IndexError::Corrupt(format!("neighbor list for {key:?}")));
            }
        }
        Ok(())
    }
}

/// Filter and truncation parameters for an index build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub min_pv: u64,
    pub ctr_threshold: f64,
    pub top_k: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            min_pv: 100,
            ctr_threshold: 0.2,
            top_k: 20,
        }
    }
}

impl IndexConfig {
    pub fn validate(&self) -> Result<(), IndexError> {
        if self.min_pv < 1 {
            return Err(IndexError::InvalidConfig("min_pv must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.ctr_threshold) {
            return Err(IndexError::InvalidConfig(
                "ctr_threshold must lie in [0, 1]".into(),
            ));
        }
        if self.top_k < 1 {
            return Err(IndexError::InvalidConfig("top_k must be at least 1".into()));
        }
        Ok(())
    }

    /// Whether a pair survives the exposure and click-through filters. The
    /// threshold is inclusive.
    pub fn admits(&self, stats: &ExposureStats) -> bool {
        stats.pv >= self.min_pv && stats.ctr >= self.ctr_threshold
    }
}

/// Builds the query-side and item-side indexes from aggregated stats.
pub fn build_neighbor_indexes(
    stats: &[ExposureStats],
    config: &IndexConfig,
    version: &str,
) -> Result<(NeighborIndex, NeighborIndex), IndexError> {
    config.validate()?;
    if !is_date_label(version) {
        return Err(IndexError::BadDate(version.to_owned()));
    }

    let mut by_query: BTreeMap<String, Vec<Neighbor>> = BTreeMap::new();
    let mut by_item: BTreeMap<String, Vec<Neighbor>> = BTreeMap::new();
    for s in stats.iter().filter(|s| config.admits(s)) {
        by_query.entry(s.query.clone()).or_default().push(Neighbor {
            partner: s.item.clone(),
            ctr: s.ctr,
        });
        by_item.entry(s.item.clone()).or_default().push(Neighbor {
            partner: s.query.clone(),
            ctr: s.ctr,
        });
    }

    let finish = |side, mut entries: BTreeMap<String, Vec<Neighbor>>| {
        for list in entries.values_mut() {
            list.sort_by(neighbor_order);
            list.truncate(config.top_k);
        }
        NeighborIndex {
            side,
            version: version.to_owned(),
            entries,
        }
    };
    Ok((finish(Side::Query, by_query), finish(Side::Item, by_item)))
}
