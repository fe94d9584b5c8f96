//! Brand / keyword / intent side information for queries and items.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::index::Side;
use super::logs::LineError;
use super::text::{normalize_key, normalize_text};
use super::IndexError;

/// Structured side information. Absent attributes are `None`, never `""`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brand: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
}

fn present(value: Option<String>) -> Option<String> {
    value
        .map(|v| normalize_text(&v))
        .filter(|v| !v.is_empty())
}

impl AttributeSet {
    /// Builds a set, normalizing values and mapping empty strings to absence.
    pub fn new(brand: Option<String>, keyword: Option<String>, intent: Option<String>) -> Self {
        Self {
            brand: present(brand),
            keyword: present(keyword),
            intent: present(intent),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.brand.is_none() && self.keyword.is_none() && self.intent.is_none()
    }
}

#[derive(Deserialize)]
struct AttributeLine {
    key: String,
    side: Side,
    brand: Option<String>,
    keyword: Option<String>,
    intent: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeTable {
    pub query: BTreeMap<String, AttributeSet>,
    pub item: BTreeMap<String, AttributeSet>,
}

/// What happened while loading an attribute file.
#[derive(Debug, Default)]
pub struct AttributeLoadReport {
    pub loaded: usize,
    /// Keys seen more than once; the last entry won.
    pub duplicates: Vec<(Side, String)>,
    pub errors: Vec<LineError>,
}

impl AttributeTable {
    pub fn side(&self, side: Side) -> &BTreeMap<String, AttributeSet> {
        match side {
            Side::Query => &self.query,
            Side::Item => &self.item,
        }
    }

    pub fn insert(&mut self, side: Side, key: String, attrs: AttributeSet) -> Option<AttributeSet> {
        match side {
            Side::Query => self.query.insert(key, attrs),
            Side::Item => self.item.insert(key, attrs),
        }
    }

    /// Stored attributes for `key`, or the all-absent set.
    pub fn lookup(&self, side: Side, key: &str) -> AttributeSet {
        self.side(side)
            .get(&normalize_text(key))
            .cloned()
            .unwrap_or_default()
    }

    /// Loads JSON-lines `{key, side, brand?, keyword?, intent?}` records.
    /// Later duplicates replace earlier ones and are logged as warnings.
    pub fn read_jsonl<R: BufRead>(
        &mut self,
        reader: R,
    ) -> std::io::Result<AttributeLoadReport> {
        let mut report = AttributeLoadReport::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<AttributeLine>(&line)
                .map_err(|e| IndexError::MalformedRecord(e.to_string()))
                .and_then(|raw| Ok((normalize_key(&raw.key)?, raw)));
            match parsed {
                Ok((key, raw)) => {
                    let attrs = AttributeSet::new(raw.brand, raw.keyword, raw.intent);
                    if self.insert(raw.side, key.clone(), attrs).is_some() {
                        log::warn!(
                            "duplicate {} attribute key {key:?} on line {}; keeping the later entry",
                            raw.side.as_str(),
                            n + 1
                        );
                        report.duplicates.push((raw.side, key));
                    }
                    report.loaded += 1;
                }
                Err(e) => report.errors.push(LineError {
                    line: n + 1,
                    error: e.to_string(),
                }),
            }
        }
        Ok(report)
    }
}
