//! Key canonicalization shared by indexes, attribute tables and the score store.

use unicode_normalization::UnicodeNormalization;

use super::IndexError;

/// Separator used to build composite `query\u{1}item` keys. Normalized keys
/// never contain it.
pub const COMPOSITE_SEPARATOR: char = '\u{1}';

/// NFC-normalizes, lowercases, trims and collapses internal whitespace runs
/// to a single ASCII space.
pub fn normalize_text(raw: &str) -> String {
    let nfc: String = raw.nfc().collect();
    let lowered = nfc.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    // Lowercasing can denormalize a handful of code points.
    if out.is_ascii() {
        out
    } else {
        out.nfc().collect()
    }
}

/// Normalizes `raw` and rejects results that cannot serve as lookup keys:
/// empty strings and strings carrying control characters.
pub fn normalize_key(raw: &str) -> Result<String, IndexError> {
    let key = normalize_text(raw);
    if key.is_empty() {
        return Err(IndexError::EmptyKey);
    }
    if key.chars().any(char::is_control) {
        return Err(IndexError::ControlCharacter(key));
    }
    Ok(key)
}
