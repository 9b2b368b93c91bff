//! Randomized structural properties beyond the fixed-seed unit tests.

use proptest::prelude::*;

use fairrec::curation::{assemble_list, CurationConfig, GroupCandidates};
use fairrec::dataset::{generate_synthetic, leave_one_out_split, SyntheticParams};
use fairrec::evaluation::{cv_fairness, mred};
use fairrec::grouping::quartile_grouping;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// MRED is never positive and is zero when all groups match overall.
    #[test]
    fn mred_nonpositive(mrs in prop::collection::vec(0.0f64..=1.0, 1..6), overall in 0.0f64..=1.0) {
        prop_assert!(mred(&mrs, overall) <= 0.0);
        prop_assert_eq!(mred(&vec![overall; mrs.len()], overall), 0.0);
    }

    /// CV is scale-free under any positive scaling.
    #[test]
    fn cv_scale_invariant(
        hrs in prop::collection::vec(0.01f64..=1.0, 1..6),
        avg in 0.01f64..=1.0,
        scale in 0.1f64..=10.0,
    ) {
        let a = cv_fairness(&hrs, avg).unwrap();
        let scaled: Vec<f64> = hrs.iter().map(|h| h * scale).collect();
        let b = cv_fairness(&scaled, avg * scale).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    /// Leave-one-out always partitions each row: held item + train row =
    /// original row.
    #[test]
    fn split_partitions_rows(seed in 0u64..500, fold in 0u32..4) {
        let data = generate_synthetic(&SyntheticParams {
            n_users: 20,
            n_items: 30,
            n_artists: 5,
            mean_interactions: 6.0,
            popularity_exponent: 1.0,
            seed,
        }).unwrap().interactions;
        let split = leave_one_out_split(&data, fold, seed ^ 0xabcd).unwrap();
        for u in 0..data.n_users() {
            let mut rebuilt = split.train.row(u).to_vec();
            rebuilt.push(split.held_out[u]);
            rebuilt.sort_unstable();
            prop_assert_eq!(rebuilt.as_slice(), data.row(u));
        }
    }

    /// Quartile grouping always yields 4 nonempty near-equal groups for
    /// n >= 4 values.
    #[test]
    fn quartile_groups_nonempty(values in prop::collection::vec(0u64..10_000, 4..200)) {
        let g = quartile_grouping("pop", &values);
        let sizes = g.group_sizes();
        prop_assert!(sizes.iter().all(|&s| s > 0), "{:?}", sizes);
        let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(max - min <= 1, "{:?}", sizes);
    }

    /// Assembled lists are valid for any k and any candidate pools with
    /// enough backfill.
    #[test]
    fn assembled_lists_valid(k in 8usize..60, seed in 0u64..1000) {
        let cfg = CurationConfig::small(k);
        let mut rng = fairrec::numerics::stream_rng(seed, "prop-curation", 0);
        use rand::Rng;
        let mut pool: Vec<u32> = (0..2000).collect();
        for i in (1..pool.len()).rev() {
            pool.swap(i, rng.gen_range(0..=i));
        }
        let mut take = |n: usize| -> Vec<u32> { pool.split_off(pool.len() - n) };
        let backfill = take(k);
        let lists = [
            take(cfg.counts[0]),
            take(cfg.counts[1]),
            take(cfg.counts[2]),
            take(cfg.counts[3]),
        ];
        let bpr = if rng.gen::<bool>() { lists[1][0] } else { take(1)[0] };
        let lt = if rng.gen::<bool>() { lists[0][0] } else { take(1)[0] };
        let cands = GroupCandidates { lists, shortfalls: [0; 4], backfill };
        let list = assemble_list(&cands, Some(lt), bpr, 0, &cfg).unwrap();
        prop_assert_eq!(list.items.len(), k);
        let unique: std::collections::HashSet<u32> = list.items.iter().copied().collect();
        prop_assert_eq!(unique.len(), k);
        prop_assert_eq!(list.items[0], bpr);
    }
}
