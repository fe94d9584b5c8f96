//! Fixtures shared by the integration tests.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use relevance_core::behavior_index::{
    build_neighbor_indexes, AttributeSet, AttributeTable, BehaviorKnowledge, ExposureStats,
    IndexConfig, Side,
};

pub const DAY: &str = "2024-01-31";

/// Random stats over unique pairs. A share of pairs sits exactly on the
/// default `pv = 100` and `ctr = 0.2` boundaries.
pub fn random_stats<R: Rng>(rng: &mut R, max_queries: usize, max_items: usize) -> Vec<ExposureStats> {
    let nq = rng.random_range(1..=max_queries);
    let ni = rng.random_range(1..=max_items);
    let density: f64 = rng.random_range(0.05..0.9);
    let mut out = Vec::new();
    for q in 0..nq {
        for i in 0..ni {
            if !rng.random_bool(density) {
                continue;
            }
            let (pv, clicks) = match rng.random_range(0..10) {
                0 => (100, 20),
                1 => (100, rng.random_range(0..=100)),
                2 => (5 * rng.random_range(20..=60u64), rng.random_range(0..=3)),
                _ => {
                    let pv = rng.random_range(1..=400u64);
                    (pv, rng.random_range(0..=pv))
                }
            };
            out.push(ExposureStats::new(format!("q{q}"), format!("i{i}"), pv, clicks).unwrap());
        }
    }
    out
}

/// `a/b` ahead of `c/d` in neighbor order, by exact rational comparison.
fn beats(ctr_a: (u64, u64), partner_a: &str, ctr_b: (u64, u64), partner_b: &str) -> bool {
    let lhs = ctr_a.0 as u128 * ctr_b.1 as u128;
    let rhs = ctr_b.0 as u128 * ctr_a.1 as u128;
    match lhs.cmp(&rhs) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => partner_a < partner_b,
    }
}

/// Brute-force neighbor lists: admit by predicate, then keep each candidate
/// outranked by fewer than `top_k` rivals, listed by that rank.
pub fn brute_force_lists(
    stats: &[ExposureStats],
    min_pv: u64,
    ctr_num: u64,
    ctr_den: u64,
    top_k: usize,
    side: Side,
) -> BTreeMap<String, Vec<(String, f64)>> {
    let admitted: Vec<&ExposureStats> = stats
        .iter()
        .filter(|s| s.pv >= min_pv && s.clicks as u128 * ctr_den as u128 >= ctr_num as u128 * s.pv as u128)
        .collect();
    let keys: BTreeSet<&str> = admitted
        .iter()
        .map(|s| match side {
            Side::Query => s.query.as_str(),
            Side::Item => s.item.as_str(),
        })
        .collect();
    let mut out = BTreeMap::new();
    for key in keys {
        let cands: Vec<(&str, (u64, u64))> = admitted
            .iter()
            .filter_map(|s| match side {
                Side::Query if s.query == key => Some((s.item.as_str(), (s.clicks, s.pv))),
                Side::Item if s.item == key => Some((s.query.as_str(), (s.clicks, s.pv))),
                _ => None,
            })
            .collect();
        let mut ranked: Vec<(usize, String, f64)> = Vec::new();
        for (p, c) in &cands {
            let rank = cands
                .iter()
                .filter(|(op, oc)| op != p && beats(*oc, op, *c, p))
                .count();
            if rank < top_k {
                ranked.push((rank, p.to_string(), c.0 as f64 / c.1 as f64));
            }
        }
        ranked.sort_by_key(|r| r.0);
        out.insert(
            key.to_owned(),
            ranked.into_iter().map(|(_, p, c)| (p, c)).collect(),
        );
    }
    out
}

/// A small knowledge snapshot with neighbors and attributes on both sides.
pub fn small_knowledge<R: Rng>(rng: &mut R) -> BehaviorKnowledge {
    let stats = random_stats(rng, 6, 8);
    let config = IndexConfig {
        min_pv: 1,
        ctr_threshold: 0.1,
        top_k: 4,
    };
    let (qi, ii) = build_neighbor_indexes(&stats, &config, DAY).unwrap();
    let mut attrs = AttributeTable::default();
    for q in 0..6 {
        if rng.random_bool(0.7) {
            attrs.insert(
                Side::Query,
                format!("q{q}"),
                AttributeSet::new(
                    Some(format!("brand{}", q % 3)),
                    Some(format!("kw{} kw{}", q, q + 1)),
                    Some(format!("topic{}", q % 2)),
                ),
            );
        }
    }
    for i in 0..8 {
        if rng.random_bool(0.7) {
            attrs.insert(
                Side::Item,
                format!("i{i}"),
                AttributeSet::new(Some(format!("brand{}", i % 3)), None, Some(format!("topic{}", i % 2))),
            );
        }
    }
    BehaviorKnowledge::new(qi, ii, attrs).unwrap()
}

/// Pairwise AUC over every positive-negative pair, ties credited one half.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0u64;
    for (sp, yp) in scores.iter().zip(labels) {
        if *yp != 1 {
            continue;
        }
        for (sn, yn) in scores.iter().zip(labels) {
            if *yn != 0 {
                continue;
            }
            pairs += 1;
            if sp > sn {
                credit += 1.0;
            } else if sp == sn {
                credit += 0.5;
            }
        }
    }
    credit / pairs as f64
}
