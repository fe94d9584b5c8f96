//! Hashed sparse features for the built-in scorer.
//!
//! A prompt contributes four feature families, each hashed with 64-bit
//! FNV-1a into `[0, dim)`:
//!
//! - word unigrams (`w`), split on whitespace
//! - character bigrams (`c2`) and trigrams (`c3`) over the whole prompt
//! - cross-field token pairs (`x`): the prompt is split into fields on
//!   `" | "`, each `name: value` field is tokenized on whitespace, `;` and
//!   `,`, and every token of an earlier field is paired with every token of a
//!   later field
//! - field matches (`m`): for each pair of fields, the number of tokens the
//!   two share, keyed by the two field names; `none` never matches
//!
//! A linear model over bag-of-n-gram counts is additive in the query-side
//! and item-side text, so it cannot express "these two belong together".
//! The cross-field pairs give it that interaction for token pairs seen in
//! training, and the field matches give it one that carries over to unseen
//! names, such as an item listed among the query's neighbors.
//!
//! Keys are the family tag, `\x1f`, then the text (pairs are joined with a
//! second `\x1f`). Values are occurrence counts.

use serde::{Deserialize, Serialize};

use crate::prompt::EMPTY_SLOT;

pub const DEFAULT_DIM: usize = 1 << 18;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

const FIELD_SEPARATOR: &str = " | ";
const KEY_SEPARATOR: char = '\x1f';

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFamily {
    Word,
    CharBigram,
    CharTrigram,
    CrossField,
    FieldMatch,
}

impl FeatureFamily {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Word => "w",
            Self::CharBigram => "c2",
            Self::CharTrigram => "c3",
            Self::CrossField => "x",
            Self::FieldMatch => "m",
        }
    }
}

/// Hash bucket of one feature key.
pub fn feature_index(family: FeatureFamily, text: &str, dim: usize) -> u32 {
    let mut key = String::with_capacity(text.len() + 4);
    key.push_str(family.tag());
    key.push(KEY_SEPARATOR);
    key.push_str(text);
    (fnv1a64(key.as_bytes()) % dim as u64) as u32
}

/// Sparse vector sorted by index with no repeated indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dim: usize,
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    /// Sorts and merges duplicate indices by summing their values.
    pub fn from_unsorted(dim: usize, mut raw: Vec<(u32, f64)>) -> Self {
        raw.sort_unstable_by_key(|e| e.0);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(raw.len());
        for (idx, v) in raw {
            match entries.last_mut() {
                Some(last) if last.0 == idx => last.1 += v,
                _ => entries.push((idx, v)),
            }
        }
        Self { dim, entries }
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn field_tokens(field: &str) -> Option<(&str, Vec<&str>)> {
    let (name, value) = field.split_once(": ")?;
    Some((
        name,
        value
            .split(|c: char| c.is_whitespace() || c == ';' || c == ',')
            .filter(|t| !t.is_empty())
            .collect(),
    ))
}

pub fn toy_featurize(prompt: &str, dim: usize) -> FeatureVector {
    let mut raw: Vec<(u32, f64)> = Vec::new();
    let mut push = |family, text: &str| raw.push((feature_index(family, text, dim), 1.0));

    for word in prompt.split_whitespace() {
        push(FeatureFamily::Word, word);
    }

    let bounds: Vec<usize> = prompt
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(prompt.len()))
        .collect();
    for n in [2usize, 3] {
        let family = if n == 2 {
            FeatureFamily::CharBigram
        } else {
            FeatureFamily::CharTrigram
        };
        for w in bounds.windows(n + 1) {
            push(family, &prompt[w[0]..w[n]]);
        }
    }

    let fields: Vec<(&str, Vec<&str>)> = prompt
        .split(FIELD_SEPARATOR)
        .filter_map(field_tokens)
        .collect();
    let mut pair = String::new();
    let mut matched: Vec<(u32, f64)> = Vec::new();
    for (s, (left_name, left)) in fields.iter().enumerate() {
        for (right_name, right) in &fields[s + 1..] {
            let mut matches = 0usize;
            for a in left {
                for b in right {
                    pair.clear();
                    pair.push_str(a);
                    pair.push(KEY_SEPARATOR);
                    pair.push_str(b);
                    push(FeatureFamily::CrossField, &pair);
                    if a == b && *a != EMPTY_SLOT {
                        matches += 1;
                    }
                }
            }
            if matches > 0 {
                pair.clear();
                pair.push_str(left_name);
                pair.push(KEY_SEPARATOR);
                pair.push_str(right_name);
                let index = feature_index(FeatureFamily::FieldMatch, &pair, dim);
                matched.push((index, matches as f64));
            }
        }
    }
    raw.extend(matched);

    FeatureVector::from_unsorted(dim, raw)
}
