//! Property tests for neighbor index construction.

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relevance_core::behavior_index::{
    aggregate_logs, build_neighbor_indexes, recent_window, ExposureStats, IndexConfig,
    NeighborIndex, SearchLogRecord, Side,
};

fn stats_for(seed: u64) -> Vec<ExposureStats> {
    common::random_stats(&mut ChaCha8Rng::seed_from_u64(seed), 12, 20)
}

fn edges(index: &NeighborIndex) -> Vec<(String, String, f64)> {
    index
        .entries
        .iter()
        .flat_map(|(k, v)| v.iter().map(move |n| (k.clone(), n.partner.clone(), n.ctr)))
        .collect()
}

fn unbounded(min_pv: u64, ctr_threshold: f64) -> IndexConfig {
    IndexConfig {
        min_pv,
        ctr_threshold,
        top_k: usize::MAX,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn matches_brute_force(seed in any::<u64>(), top_k in 1usize..8) {
        let stats = stats_for(seed);
        let config = IndexConfig { top_k, ..IndexConfig::default() };
        let (qi, ii) = build_neighbor_indexes(&stats, &config, common::DAY).unwrap();
        for (index, side) in [(&qi, Side::Query), (&ii, Side::Item)] {
            let expected = common::brute_force_lists(&stats, 100, 1, 5, top_k, side);
            let actual: std::collections::BTreeMap<_, Vec<_>> = index
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|n| (n.partner.clone(), n.ctr)).collect()))
                .collect();
            prop_assert_eq!(actual, expected);
        }
    }

    #[test]
    fn untruncated_sides_are_dual(seed in any::<u64>(), threshold in 0.0f64..0.6) {
        let stats = stats_for(seed);
        let (qi, ii) = build_neighbor_indexes(&stats, &unbounded(50, threshold), common::DAY).unwrap();
        let mut forward = edges(&qi);
        let mut backward: Vec<_> = edges(&ii).into_iter().map(|(i, q, c)| (q, i, c)).collect();
        forward.sort_by(|a, b| a.partial_cmp(b).unwrap());
        backward.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn input_order_does_not_matter(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let stats = stats_for(seed);
        let mut shuffled = stats.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let config = IndexConfig { top_k: 3, ..IndexConfig::default() };
        let a = build_neighbor_indexes(&stats, &config, common::DAY).unwrap();
        let b = build_neighbor_indexes(&shuffled, &config, common::DAY).unwrap();
        prop_assert_eq!(a.0.to_json().unwrap(), b.0.to_json().unwrap());
        prop_assert_eq!(a.1.to_json().unwrap(), b.1.to_json().unwrap());
    }

    #[test]
    fn stricter_filters_only_remove_edges(
        seed in any::<u64>(),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
        p1 in 1u64..200,
        p2 in 1u64..200,
    ) {
        let stats = stats_for(seed);
        let loose = unbounded(p1.min(p2), t1.min(t2));
        let strict = unbounded(p1.max(p2), t1.max(t2));
        let (lq, _) = build_neighbor_indexes(&stats, &loose, common::DAY).unwrap();
        let (sq, _) = build_neighbor_indexes(&stats, &strict, common::DAY).unwrap();
        let loose_edges = edges(&lq);
        for e in edges(&sq) {
            prop_assert!(loose_edges.contains(&e));
        }
    }

    #[test]
    fn truncation_keeps_a_prefix(seed in any::<u64>(), k in 1usize..6) {
        let stats = stats_for(seed);
        let (full, _) = build_neighbor_indexes(&stats, &unbounded(100, 0.2), common::DAY).unwrap();
        let config = IndexConfig { top_k: k, ..IndexConfig::default() };
        let (cut, _) = build_neighbor_indexes(&stats, &config, common::DAY).unwrap();
        prop_assert_eq!(full.entries.len(), cut.entries.len());
        for (key, list) in &cut.entries {
            let whole = &full.entries[key];
            prop_assert_eq!(list.len(), whole.len().min(k));
            prop_assert_eq!(&whole[..list.len()], &list[..]);
        }
    }

    #[test]
    fn log_aggregation_sums_inside_window(
        rows in prop::collection::vec((0u8..3, 0u8..3, 1u64..50, 0u8..10), 1..60),
        window_days in 1usize..10,
    ) {
        let records: Vec<SearchLogRecord> = rows
            .iter()
            .map(|&(q, i, pv, d)| SearchLogRecord {
                query: format!("q{q}"),
                item: format!("i{i}"),
                pv,
                clicks: pv / 3,
                day: format!("2024-02-{:02}", d + 1),
            })
            .collect();
        let window = recent_window(&records, window_days);
        let stats = aggregate_logs(&records, &window);
        for s in &stats {
            let (pv, clicks) = records
                .iter()
                .filter(|r| r.query == s.query && r.item == s.item && window.contains(&r.day))
                .fold((0, 0), |acc, r| (acc.0 + r.pv, acc.1 + r.clicks));
            prop_assert_eq!((s.pv, s.clicks), (pv, clicks));
        }
        let total: u64 = stats.iter().map(|s| s.pv).sum();
        let expected: u64 = records.iter().filter(|r| window.contains(&r.day)).map(|r| r.pv).sum();
        prop_assert_eq!(total, expected);
    }
}
