//! Least-to-most prompt chains.
//!
//! Each level of the chain renders one template. The default three-level
//! schedule adds information step by step: neighbors only, then neighbors
//! plus attributes, then everything including the query and item text.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::behavior_index::{AttributeSet, BehaviorKnowledge, Neighbor, Side};

/// Rendered in place of an empty neighbor list or an absent attribute.
pub const EMPTY_SLOT: &str = "none";
/// Rendered for `{mask}`.
pub const MASK_TOKEN: &str = "[mask]";
/// Separator between neighbors of one list.
pub const NEIGHBOR_JOIN: &str = "; ";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PromptError {
    #[error("unbound placeholder {0}")]
    Unbound(String),
    #[error("unknown placeholder {0}")]
    UnknownPlaceholder(String),
    #[error("unterminated placeholder in pattern {0:?}")]
    Unterminated(String),
    #[error("pattern must contain {{mask}} exactly once, found {0}")]
    MaskCount(usize),
    #[error("templates must cover levels 1..={expected} in order")]
    LevelOrder { expected: usize },
    #[error("level {0} drops information present at an earlier level")]
    NotMonotone(usize),
    #[error("no built-in template set for {0} levels")]
    NoDefault(usize),
    #[error("template file: {0}")]
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Placeholder {
    Query,
    Item,
    QueryAttributes,
    ItemAttributes,
    QueryNeighbors,
    ItemNeighbors,
    Mask,
}

impl Placeholder {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "q" => Self::Query,
            "i" => Self::Item,
            "Aq" => Self::QueryAttributes,
            "Ai" => Self::ItemAttributes,
            "Nq" => Self::QueryNeighbors,
            "Ni" => Self::ItemNeighbors,
            "mask" => Self::Mask,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Query => "q",
            Self::Item => "i",
            Self::QueryAttributes => "Aq",
            Self::ItemAttributes => "Ai",
            Self::QueryNeighbors => "Nq",
            Self::ItemNeighbors => "Ni",
            Self::Mask => "mask",
        }
    }

    pub fn category(self) -> Option<InfoCategory> {
        match self {
            Self::Query | Self::Item => Some(InfoCategory::Identity),
            Self::QueryAttributes | Self::ItemAttributes => Some(InfoCategory::Attributes),
            Self::QueryNeighbors | Self::ItemNeighbors => Some(InfoCategory::Neighbors),
            Self::Mask => None,
        }
    }
}

/// The kinds of evidence a prompt level can expose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum InfoCategory {
    Neighbors,
    Attributes,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Text(String),
    Slot(Placeholder),
}

fn parse_pattern(pattern: &str) -> Result<Vec<Piece>, PromptError> {
    let mut pieces = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            pieces.push(Piece::Text(rest[..open].to_owned()));
        }
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| PromptError::Unterminated(pattern.to_owned()))?;
        let name = &after[..close];
        let slot =
            Placeholder::parse(name).ok_or_else(|| PromptError::UnknownPlaceholder(name.into()))?;
        pieces.push(Piece::Slot(slot));
        rest = &after[close + 1..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest.to_owned()));
    }
    Ok(pieces)
}

/// One level of the chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub level: usize,
    pub pattern: String,
}

impl PromptTemplate {
    pub fn new(level: usize, pattern: impl Into<String>) -> Result<Self, PromptError> {
        let t = Self {
            level,
            pattern: pattern.into(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        let masks = self
            .placeholders()?
            .iter()
            .filter(|p| **p == Placeholder::Mask)
            .count();
        if masks != 1 {
            return Err(PromptError::MaskCount(masks));
        }
        Ok(())
    }

    pub fn placeholders(&self) -> Result<Vec<Placeholder>, PromptError> {
        Ok(parse_pattern(&self.pattern)?
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s),
                Piece::Text(_) => None,
            })
            .collect())
    }

    pub fn categories(&self) -> Result<BTreeSet<InfoCategory>, PromptError> {
        Ok(self
            .placeholders()?
            .into_iter()
            .filter_map(Placeholder::category)
            .collect())
    }
}

const LEVEL_NEIGHBORS: &str =
    "query neighbors: {Nq} | item neighbors: {Ni} | Are these two neighbor groups related? {mask}";
const LEVEL_ATTRIBUTES: &str = "query attributes: {Aq} | item attributes: {Ai} | query neighbors: {Nq} | item neighbors: {Ni} | Are these two neighbor groups related? {mask}";
const LEVEL_FULL: &str = "query: {q} | query attributes: {Aq} | query neighbors: {Nq} | item: {i} | item attributes: {Ai} | item neighbors: {Ni} | Is {q} and {i} related? {mask}";

/// The built-in chain for `levels` prompts. Shorter chains keep the most
/// informative levels, so `levels == 1` is the single full prompt.
pub fn default_templates(levels: usize) -> Result<Vec<PromptTemplate>, PromptError> {
    let all = [LEVEL_NEIGHBORS, LEVEL_ATTRIBUTES, LEVEL_FULL];
    if levels == 0 || levels > all.len() {
        return Err(PromptError::NoDefault(levels));
    }
    all[all.len() - levels..]
        .iter()
        .enumerate()
        .map(|(n, p)| PromptTemplate::new(n + 1, *p))
        .collect()
}

/// Checks that templates are numbered `1..=L` in order and that no level
/// loses an information category an earlier level had.
pub fn validate_templates(templates: &[PromptTemplate]) -> Result<(), PromptError> {
    let mut previous: BTreeSet<InfoCategory> = BTreeSet::new();
    for (n, t) in templates.iter().enumerate() {
        if t.level != n + 1 {
            return Err(PromptError::LevelOrder {
                expected: templates.len(),
            });
        }
        t.validate()?;
        let cats = t.categories()?;
        if !previous.is_subset(&cats) {
            return Err(PromptError::NotMonotone(t.level));
        }
        previous = cats;
    }
    if templates.is_empty() {
        return Err(PromptError::LevelOrder { expected: 1 });
    }
    Ok(())
}

/// Reads a JSON list of `{level, pattern}`; entries may appear in any order.
pub fn load_templates(path: &Path) -> Result<Vec<PromptTemplate>, PromptError> {
    let text = fs::read_to_string(path)
        .map_err(|e| PromptError::File(format!("{}: {e}", path.display())))?;
    let mut templates: Vec<PromptTemplate> =
        serde_json::from_str(&text).map_err(|e| PromptError::File(e.to_string()))?;
    templates.sort_by_key(|t| t.level);
    validate_templates(&templates)?;
    Ok(templates)
}

/// Values available to a template. A `None` field is unbound; an empty
/// neighbor list or all-absent attribute set is bound and renders as `none`.
#[derive(Debug, Clone, Default)]
pub struct Bindings<'a> {
    pub query: Option<&'a str>,
    pub item: Option<&'a str>,
    pub query_attributes: Option<&'a AttributeSet>,
    pub item_attributes: Option<&'a AttributeSet>,
    pub query_neighbors: Option<&'a [Neighbor]>,
    pub item_neighbors: Option<&'a [Neighbor]>,
}

fn render_neighbors(list: &[Neighbor]) -> String {
    if list.is_empty() {
        return EMPTY_SLOT.to_owned();
    }
    list.iter()
        .map(|n| n.partner.as_str())
        .collect::<Vec<_>>()
        .join(NEIGHBOR_JOIN)
}

fn render_attributes(attrs: &AttributeSet) -> String {
    if attrs.is_empty() {
        return EMPTY_SLOT.to_owned();
    }
    let field = |v: &Option<String>| v.as_deref().unwrap_or(EMPTY_SLOT).to_owned();
    format!(
        "brand={}, keyword={}, intent={}",
        field(&attrs.brand),
        field(&attrs.keyword),
        field(&attrs.intent)
    )
}

pub fn render_template(template: &PromptTemplate, b: &Bindings<'_>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.pattern.len() * 2);
    for piece in parse_pattern(&template.pattern)? {
        let slot = match piece {
            Piece::Text(t) => {
                out.push_str(&t);
                continue;
            }
            Piece::Slot(s) => s,
        };
        let unbound = || PromptError::Unbound(slot.name().to_owned());
        let text = match slot {
            Placeholder::Query => b.query.ok_or_else(unbound)?.to_owned(),
            Placeholder::Item => b.item.ok_or_else(unbound)?.to_owned(),
            Placeholder::QueryAttributes => render_attributes(b.query_attributes.ok_or_else(unbound)?),
            Placeholder::ItemAttributes => render_attributes(b.item_attributes.ok_or_else(unbound)?),
            Placeholder::QueryNeighbors => render_neighbors(b.query_neighbors.ok_or_else(unbound)?),
            Placeholder::ItemNeighbors => render_neighbors(b.item_neighbors.ok_or_else(unbound)?),
            Placeholder::Mask => MASK_TOKEN.to_owned(),
        };
        out.push_str(&text);
    }
    Ok(out)
}

/// The rendered chain for one pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptChain {
    pub query: String,
    pub item: String,
    pub levels: Vec<String>,
}

/// Looks up neighbors and attributes for `(query, item)` and renders every
/// level. Templates must already be validated.
pub fn build_prompt_chain(
    query: &str,
    item: &str,
    knowledge: &BehaviorKnowledge,
    templates: &[PromptTemplate],
) -> Result<PromptChain, PromptError> {
    let query = crate::behavior_index::normalize_text(query);
    let item = crate::behavior_index::normalize_text(item);
    let query_attributes = knowledge.attributes.lookup(Side::Query, &query);
    let item_attributes = knowledge.attributes.lookup(Side::Item, &item);
    let bindings = Bindings {
        query: Some(&query),
        item: Some(&item),
        query_attributes: Some(&query_attributes),
        item_attributes: Some(&item_attributes),
        query_neighbors: Some(knowledge.neighbors(Side::Query, &query)),
        item_neighbors: Some(knowledge.neighbors(Side::Item, &item)),
    };
    let levels = templates
        .iter()
        .map(|t| render_template(t, &bindings))
        .collect::<Result<_, _>>()?;
    Ok(PromptChain {
        query,
        item,
        levels,
    })
}
