//! Seeded synthetic corpora with a known latent topic structure.
//!
//! Every query and item belongs to one hidden topic. Names are opaque
//! tokens (`q17`, `i342`) assigned independently of topic, so the text of a
//! pair says nothing about relevance. Click behavior does: co-topic pairs
//! click at `ctr_in`, cross-topic pairs at `ctr_out`.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::behavior_index::{
    read_logs, AttributeSet, AttributeTable, LogIngest, SearchLogRecord, Side,
};
use crate::training::{read_labeled_pairs, write_labeled_pairs, LabeledPair};

use super::HarnessError;

pub const CONFIG_FILE: &str = "config.json";
pub const LOGS_FILE: &str = "logs.jsonl";
pub const ATTRIBUTES_FILE: &str = "attributes.jsonl";
pub const LABELED_FILE: &str = "labeled.jsonl";

/// Log records are spread over this many consecutive days ending on
/// [`LAST_DAY`].
pub const LOG_DAYS: u32 = 30;
pub const LAST_DAY: &str = "2024-01-31";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub topics: usize,
    pub n_queries: usize,
    pub n_items: usize,
    /// Click rate of co-topic pairs.
    pub ctr_in: f64,
    /// Click rate of cross-topic pairs.
    pub ctr_out: f64,
    /// Mean exposure count per pair; draws are uniform on
    /// `[pv_mean / 4, 7 * pv_mean / 4]`.
    pub pv_mean: u64,
    pub label_noise: f64,
    /// Distinct items each query is exposed to.
    pub exposures_per_query: usize,
    /// Share of a query's exposures that go to co-topic items.
    pub co_topic_share: f64,
    /// Probability that a query or item carries attributes.
    pub attr_coverage: f64,
    /// Labeled pairs, half drawn co-topic and half cross-topic.
    pub n_labeled: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            topics: 50,
            n_queries: 2000,
            n_items: 2000,
            ctr_in: 0.4,
            ctr_out: 0.05,
            pv_mean: 200,
            label_noise: 0.05,
            exposures_per_query: 24,
            co_topic_share: 0.5,
            attr_coverage: 0.7,
            n_labeled: 10_000,
        }
    }
}

impl SyntheticConfig {
    /// Click behavior identical for every pair and labels that are coin
    /// flips: nothing to learn.
    pub fn negative_control() -> Self {
        Self {
            ctr_in: 0.3,
            ctr_out: 0.3,
            label_noise: 0.5,
            ..Self::default()
        }
    }

    /// Strong click separation and clean labels.
    pub fn positive_control() -> Self {
        Self {
            ctr_in: 0.5,
            ctr_out: 0.02,
            label_noise: 0.0,
            ..Self::default()
        }
    }

    /// `ctr_in == ctr_out` is accepted so the negative control can be
    /// expressed.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        for (name, v) in [
            ("ctr_in", self.ctr_in),
            ("ctr_out", self.ctr_out),
            ("label_noise", self.label_noise),
            ("co_topic_share", self.co_topic_share),
            ("attr_coverage", self.attr_coverage),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.ctr_in < self.ctr_out {
            return bad(format!(
                "ctr_in ({}) must not be below ctr_out ({})",
                self.ctr_in, self.ctr_out
            ));
        }
        if self.topics < 2 {
            return bad("at least two topics are needed".into());
        }
        if self.n_queries < self.topics || self.n_items < self.topics {
            return bad("every topic needs at least one query and one item".into());
        }
        if self.pv_mean < 4 {
            return bad("pv_mean must be at least 4".into());
        }
        if self.exposures_per_query == 0 || self.exposures_per_query > self.n_items {
            return bad("exposures_per_query must lie in [1, n_items]".into());
        }
        if self.n_labeled < 3 {
            return bad("n_labeled must be at least 3".into());
        }
        // half the labeled pairs are cross-topic, so the pair space has to
        // be comfortably larger than the request
        if self.n_labeled > self.n_queries * self.n_items / 4 {
            return bad("n_labeled is too large for the number of queries and items".into());
        }
        Ok(())
    }
}

/// Attribute file line.
#[derive(Serialize)]
struct AttributeLine<'a> {
    key: &'a str,
    side: Side,
    #[serde(skip_serializing_if = "Option::is_none")]
    brand: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    keyword: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intent: Option<&'a str>,
}

/// A corpus held in memory, as generated or as loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub config: SyntheticConfig,
    pub logs: Vec<SearchLogRecord>,
    pub attributes: AttributeTable,
    pub labeled: Vec<LabeledPair>,
}

impl SyntheticCorpus {
    /// Version label for indexes built from this corpus.
    pub fn version(&self) -> &'static str {
        LAST_DAY
    }

    /// Writes `config.json`, `logs.jsonl`, `attributes.jsonl` and
    /// `labeled.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let put = |name: &str, body: String| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))
        };

        let mut config = serde_json::to_string_pretty(&self.config).expect("config serializes");
        config.push('\n');
        put(CONFIG_FILE, config)?;

        let mut logs = String::new();
        for r in &self.logs {
            logs.push_str(&serde_json::to_string(r).expect("record serializes"));
            logs.push('\n');
        }
        put(LOGS_FILE, logs)?;

        let mut attrs = String::new();
        for side in [Side::Query, Side::Item] {
            for (key, set) in self.attributes.side(side) {
                let line = AttributeLine {
                    key,
                    side,
                    brand: set.brand.as_deref(),
                    keyword: set.keyword.as_deref(),
                    intent: set.intent.as_deref(),
                };
                attrs.push_str(&serde_json::to_string(&line).expect("attribute serializes"));
                attrs.push('\n');
            }
        }
        put(ATTRIBUTES_FILE, attrs)?;

        let path = dir.join(LABELED_FILE);
        write_labeled_pairs(&path, &self.labeled).map_err(|e| HarnessError::io(&path, e))
    }

    /// Reads a corpus directory written by [`write`](Self::write). Any
    /// malformed line is an error.
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let open = |name: &str| {
            let path = dir.join(name);
            File::open(&path)
                .map(BufReader::new)
                .map_err(|e| HarnessError::io(&path, e))
        };

        let path = dir.join(CONFIG_FILE);
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let config: SyntheticConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Corpus(format!("{}: {e}", path.display())))?;

        let mut ingest = LogIngest::default();
        read_logs(open(LOGS_FILE)?, &mut ingest)
            .map_err(|e| HarnessError::io(&dir.join(LOGS_FILE), e))?;
        if let Some(first) = ingest.errors.first() {
            return Err(HarnessError::Corpus(format!(
                "{} line {}: {}",
                LOGS_FILE, first.line, first.error
            )));
        }

        let mut attributes = AttributeTable::default();
        let report = attributes
            .read_jsonl(open(ATTRIBUTES_FILE)?)
            .map_err(|e| HarnessError::io(&dir.join(ATTRIBUTES_FILE), e))?;
        if let Some(first) = report.errors.first() {
            return Err(HarnessError::Corpus(format!(
                "{} line {}: {}",
                ATTRIBUTES_FILE, first.line, first.error
            )));
        }

        let labeled = read_labeled_pairs(open(LABELED_FILE)?)
            .map_err(|e| HarnessError::Corpus(format!("{LABELED_FILE}: {e}")))?;

        Ok(Self {
            config,
            logs: ingest.records,
            attributes,
            labeled,
        })
    }
}

/// Words in each topic's keyword phrase.
const KEYWORD_TOKENS: u8 = 5;

/// Brand, keyword and intent all derive from the topic id; the intent is
/// the topic name.
fn topic_attributes(t: usize) -> AttributeSet {
    AttributeSet::new(
        Some(format!("brand{t:02}")),
        Some(
            (0..KEYWORD_TOKENS)
                .map(|k| format!("kw{t:02}{}", char::from(b'a' + k)))
                .collect::<Vec<_>>()
                .join(" "),
        ),
        Some(format!("topic{t:02}")),
    )
}

/// `January (32 - LOG_DAYS + d)` for `d` in `0..LOG_DAYS`.
fn day_label(d: u32) -> String {
    format!("2024-01-{:02}", 32 - LOG_DAYS + d)
}

/// Balanced topic assignment in random order.
fn assign_topics(n: usize, topics: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut t: Vec<usize> = (0..n).map(|k| k % topics).collect();
    t.shuffle(rng);
    t
}

/// Draws a random index from `0..n` whose topic differs from `topic`.
fn other_topic(topics_of: &[usize], topic: usize, rng: &mut ChaCha8Rng) -> usize {
    loop {
        let k = rng.random_range(0..topics_of.len());
        if topics_of[k] != topic {
            return k;
        }
    }
}

pub fn generate_synthetic_corpus(config: &SyntheticConfig) -> Result<SyntheticCorpus, HarnessError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let query_topic = assign_topics(config.n_queries, config.topics, &mut rng);
    let item_topic = assign_topics(config.n_items, config.topics, &mut rng);
    let query_name = |q: usize| format!("q{q}");
    let item_name = |i: usize| format!("i{i}");
    let mut items_by_topic: Vec<Vec<usize>> = vec![Vec::new(); config.topics];
    for (i, &t) in item_topic.iter().enumerate() {
        items_by_topic[t].push(i);
    }

    let mut logs = Vec::new();
    let pv_low = config.pv_mean / 4;
    let pv_high = config.pv_mean * 7 / 4;
    for (q, &topic) in query_topic.iter().enumerate() {
        let same = &items_by_topic[topic];
        let n_co = ((config.exposures_per_query as f64 * config.co_topic_share).round() as usize)
            .min(same.len());
        let mut exposed: Vec<usize> = same.choose_multiple(&mut rng, n_co).copied().collect();
        let n_cross = (config.exposures_per_query - n_co).min(config.n_items - same.len());
        let mut seen: BTreeSet<usize> = exposed.iter().copied().collect();
        while exposed.len() < n_co + n_cross {
            let i = other_topic(&item_topic, topic, &mut rng);
            if seen.insert(i) {
                exposed.push(i);
            }
        }

        for i in exposed {
            let ctr = if item_topic[i] == topic {
                config.ctr_in
            } else {
                config.ctr_out
            };
            let pv = rng.random_range(pv_low..=pv_high);
            // split the exposure over one to three distinct days
            let parts = rng.random_range(1..=3u32).min(pv.max(1) as u32);
            let mut days: Vec<u32> = (0..LOG_DAYS).collect();
            days.shuffle(&mut rng);
            days.truncate(parts as usize);
            days.sort_unstable();
            let mut remaining = pv;
            for (k, d) in days.iter().enumerate() {
                let share = if k + 1 == days.len() {
                    remaining
                } else {
                    rng.random_range(0..=remaining)
                };
                remaining -= share;
                if share == 0 {
                    continue;
                }
                let clicks = Binomial::new(share, ctr)
                    .expect("ctr validated to lie in [0, 1]")
                    .sample(&mut rng);
                logs.push(SearchLogRecord {
                    query: query_name(q),
                    item: item_name(i),
                    pv: share,
                    clicks,
                    day: day_label(*d),
                });
            }
        }
    }

    let mut attributes = AttributeTable::default();
    for (side, topics) in [(Side::Query, &query_topic), (Side::Item, &item_topic)] {
        for (k, &t) in topics.iter().enumerate() {
            if rng.random_bool(config.attr_coverage) {
                let key = match side {
                    Side::Query => query_name(k),
                    Side::Item => item_name(k),
                };
                attributes.insert(side, key, topic_attributes(t));
            }
        }
    }

    let mut labeled = Vec::with_capacity(config.n_labeled);
    let mut drawn: BTreeSet<(usize, usize)> = BTreeSet::new();
    while labeled.len() < config.n_labeled {
        let q = rng.random_range(0..config.n_queries);
        let topic = query_topic[q];
        let co_topic = rng.random_bool(0.5);
        let i = if co_topic {
            *items_by_topic[topic].choose(&mut rng).expect("every topic has items")
        } else {
            other_topic(&item_topic, topic, &mut rng)
        };
        let flip = rng.random_bool(config.label_noise);
        if !drawn.insert((q, i)) {
            continue;
        }
        let label = u8::from(co_topic != flip);
        labeled.push(
            LabeledPair::new(&query_name(q), &item_name(i), label)
                .expect("generated names are valid keys"),
        );
    }

    Ok(SyntheticCorpus {
        config: config.clone(),
        logs,
        attributes,
        labeled,
    })
}
