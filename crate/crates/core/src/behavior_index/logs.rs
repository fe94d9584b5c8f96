//! Search-log ingestion and click-through aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::text::normalize_key;
use super::IndexError;

/// One line of the exposure log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchLogRecord {
    pub query: String,
    pub item: String,
    pub pv: u64,
    #[serde(rename = "click")]
    pub clicks: u64,
    pub day: String,
}

#[derive(Deserialize)]
struct RawRecord {
    query: String,
    item: String,
    pv: u64,
    click: u64,
    day: String,
}

/// Aggregated exposure evidence for one `(query, item)` pair. Only built for
/// pairs with at least one exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureStats {
    pub query: String,
    pub item: String,
    pub pv: u64,
    pub clicks: u64,
    pub ctr: f64,
}

impl ExposureStats {
    /// Returns `None` when `pv == 0`, since the ratio is undefined there.
    pub fn new(query: String, item: String, pv: u64, clicks: u64) -> Option<Self> {
        if pv == 0 || clicks > pv {
            return None;
        }
        Some(Self {
            query,
            item,
            pv,
            clicks,
            ctr: clicks as f64 / pv as f64,
        })
    }
}

/// Checks the `YYYY-MM-DD` shape; calendar validity is not enforced.
pub fn is_date_label(day: &str) -> bool {
    let b = day.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

pub fn parse_log_line(line: &str) -> Result<SearchLogRecord, IndexError> {
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| IndexError::MalformedRecord(e.to_string()))?;
    if raw.click > raw.pv {
        return Err(IndexError::ClicksExceedPv {
            clicks: raw.click,
            pv: raw.pv,
        });
    }
    if !is_date_label(&raw.day) {
        return Err(IndexError::BadDate(raw.day));
    }
    Ok(SearchLogRecord {
        query: normalize_key(&raw.query)?,
        item: normalize_key(&raw.item)?,
        pv: raw.pv,
        clicks: raw.click,
        day: raw.day,
    })
}

/// A rejected log line. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct LogIngest {
    pub records: Vec<SearchLogRecord>,
    pub errors: Vec<LineError>,
}

/// Reads JSON-lines logs. Bad lines are tallied and skipped; only I/O
/// failures abort the read.
pub fn read_logs<R: BufRead>(reader: R, ingest: &mut LogIngest) -> std::io::Result<()> {
    for (n, chunk) in reader.split(b'\n').enumerate() {
        let bytes = chunk?;
        let line = match std::str::from_utf8(&bytes) {
            Ok(s) => s.trim_end_matches('\r'),
            Err(e) => {
                ingest.errors.push(LineError {
                    line: n + 1,
                    error: format!("invalid UTF-8: {e}"),
                });
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_log_line(line) {
            Ok(record) => ingest.records.push(record),
            Err(e) => ingest.errors.push(LineError {
                line: n + 1,
                error: e.to_string(),
            }),
        }
    }
    Ok(())
}

/// The `n` most recent distinct days present in `records`.
pub fn recent_window<'a, I>(records: I, n: usize) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a SearchLogRecord>,
{
    let days: BTreeSet<&str> = records.into_iter().map(|r| r.day.as_str()).collect();
    days.into_iter()
        .rev()
        .take(n)
        .map(str::to_owned)
        .collect()
}

/// Sums exposures and clicks per pair over the records whose day is in
/// `window`. Output is sorted by `(query, item)`; zero-exposure pairs are
/// dropped.
pub fn aggregate_logs<'a, I>(records: I, window: &BTreeSet<String>) -> Vec<ExposureStats>
where
    I: IntoIterator<Item = &'a SearchLogRecord>,
{
    let mut totals: BTreeMap<(&str, &str), (u64, u64)> = BTreeMap::new();
    for r in records {
        if !window.contains(&r.day) {
            continue;
        }
        let entry = totals.entry((&r.query, &r.item)).or_default();
        entry.0 += r.pv;
        entry.1 += r.clicks;
    }
    totals
        .into_iter()
        .filter_map(|((q, i), (pv, clicks))| {
            ExposureStats::new(q.to_owned(), i.to_owned(), pv, clicks)
        })
        .collect()
}
