mod common;

use anaphora::corpus::{Link, Partition};
use anaphora::metrics::{
    b_cubed, ceaf_e, conll_f1, entity_f1, max_weight_assignment, mention_prf, muc, CorefAccumulator, MetricsError,
};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn partition_enumeration_counts_match_bell_numbers() {
    for (n, bell) in [(1, 1), (2, 2), (3, 5), (4, 15), (5, 52)] {
        let items: Vec<u32> = (0..n).collect();
        assert_eq!(set_partitions(&items).len(), bell);
    }
    // Sum over subsets of Bell(k) is Bell(n + 1).
    assert_eq!(all_partial_partitions(5).len(), 203);
}

#[test]
fn random_partitions_agree_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rand::Rng::gen_range(&mut rng, 1..=6);
        let (k, r) = (random_clusters(&mut rng, n), random_clusters(&mut rng, n));
        let (pk, pr) = (partition(&k), partition(&r));
        for (name, got, want) in [
            ("muc", muc(&pk, &pr), muc_oracle(&k, &r)),
            ("b3", b_cubed(&pk, &pr), b3_oracle(&k, &r)),
            ("ceaf", ceaf_e(&pk, &pr), ceaf_e_oracle(&k, &r)),
        ] {
            assert!(close(got.recall, want.0) && close(got.precision, want.1) && close(got.f1, want.2), "{name} {k:?} {r:?}");
        }
        assert!(close(conll_f1(&pk, &pr, true), conll_oracle(&k, &r)));
    }
}

#[test]
fn identity_scores_one_hundred() {
    let k = partition(&vec![vec![0, 1, 2], vec![3, 4], vec![5]]);
    assert!(close(conll_f1(&k, &k, true), 100.0));
    assert!(close(conll_f1(&k, &k, false), 100.0));
    let singletons = partition(&vec![vec![0], vec![1], vec![2]]);
    assert!(close(conll_f1(&singletons, &singletons, true), 100.0));
}

#[test]
fn muc_without_links_on_one_side_only() {
    let singletons = partition(&vec![vec![0], vec![1], vec![2]]);
    let linked = partition(&vec![vec![0, 1], vec![2]]);
    let s = muc(&linked, &singletons);
    assert_eq!((s.recall, s.precision, s.f1), (0.0, 0.0, 0.0));
    let mut acc = CorefAccumulator::default();
    acc.add(&singletons, &singletons, true);
    acc.add(&linked, &singletons, true);
    assert_eq!(acc.scores().muc.f1, 0.0);
}

#[test]
fn singleton_free_scoring_drops_singletons_on_both_sides() {
    let k = vec![vec![0, 1], vec![2]];
    let r = vec![vec![0, 1], vec![3]];
    let (pk, pr) = (partition(&k), partition(&r));
    assert!(close(conll_f1(&pk, &pr, false), 100.0));
    assert!(conll_f1(&pk, &pr, true) < 100.0);
    let stripped = conll_oracle(&vec![vec![0, 1]], &vec![vec![0, 1]]);
    assert!(close(conll_f1(&pk, &pr, false), stripped));
}

#[test]
fn accumulator_micro_averages_counts() {
    let docs = [
        (vec![vec![0, 1, 2]], vec![vec![0, 1], vec![2]]),
        (vec![vec![0, 1], vec![2, 3]], vec![vec![0, 1, 2, 3]]),
    ];
    let mut acc = CorefAccumulator::default();
    for (k, r) in &docs {
        acc.add(&partition(k), &partition(r), true);
    }
    // MUC recall (1 + 2) / (2 + 2), precision (1 + 2) / (1 + 3).
    let s = acc.scores();
    assert!(close(s.muc.recall, 3.0 / 4.0));
    assert!(close(s.muc.precision, (1.0 + 2.0) / (1.0 + 3.0)));
}

#[test]
fn assignment_matches_exhaustive_search_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let n = rand::Rng::gen_range(&mut rng, 1..=5);
        let m = rand::Rng::gen_range(&mut rng, 1..=5);
        let w: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rand::Rng::gen_range(&mut rng, 0.0..1.0)).collect()).collect();
        let (total, rows) = max_weight_assignment(&w);
        // Exhaustive over injective maps.
        fn best(i: usize, w: &[Vec<f64>], used: &mut Vec<bool>) -> f64 {
            if i == w.len() {
                return 0.0;
            }
            let mut b = best(i + 1, w, used);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    b = b.max(w[i][j] + best(i + 1, w, used));
                    used[j] = false;
                }
            }
            b
        }
        assert!(close(total, best(0, &w, &mut vec![false; m])));
        let cols: Vec<usize> = rows.iter().flatten().copied().collect();
        let distinct: std::collections::BTreeSet<_> = cols.iter().collect();
        assert_eq!(distinct.len(), cols.len());
    }
}

fn link(a: &str, b: &str) -> Link {
    Link { anaphor: a.into(), antecedent: b.into() }
}

#[test]
fn entity_f1_credits_coreferent_antecedents() {
    let entities: Partition<String> = Partition::new(vec![vec!["m1".to_string(), "m2".to_string()]]).unwrap();
    let gold = [link("a1", "m1"), link("a2", "m3")];
    // a1 picks a mention coreferent with its gold antecedent; a2 is wrong.
    let pred = [link("a1", "m2"), link("a2", "m1")];
    assert!(close(entity_f1(&gold, &pred, &entities).unwrap(), 50.0));
    assert!(close(entity_f1(&gold, &gold, &entities).unwrap(), 100.0));
    assert_eq!(
        entity_f1(&gold, &[link("a1", "m1")], &entities),
        Err(MetricsError::AnaphorSetMismatch { missing: 1, extra: 0 })
    );
}

#[test]
fn mention_detection_is_exact_match() {
    let gold = [1, 2, 3, 4].into_iter().collect();
    let pred = [2, 3, 9].into_iter().collect();
    let p = mention_prf::<i32>(&gold, &pred);
    assert!(close(p.recall, 0.5) && close(p.precision, 2.0 / 3.0));
}

fn clusters_strategy() -> impl Strategy<Value = Clusters> {
    proptest::collection::vec(proptest::option::of(0usize..6), 0..7).prop_map(|slots| {
        let mut by = std::collections::BTreeMap::<usize, Vec<u32>>::new();
        for (m, s) in slots.into_iter().enumerate() {
            if let Some(s) = s {
                by.entry(s).or_default().push(m as u32);
            }
        }
        by.into_values().collect()
    })
}

proptest! {
    #[test]
    fn scores_are_bounded_and_symmetric_in_p_and_r(k in clusters_strategy(), r in clusters_strategy()) {
        let (pk, pr) = (partition(&k), partition(&r));
        for (a, b) in [(muc(&pk, &pr), muc(&pr, &pk)), (b_cubed(&pk, &pr), b_cubed(&pr, &pk)), (ceaf_e(&pk, &pr), ceaf_e(&pr, &pk))] {
            prop_assert!((0.0..=1.0).contains(&a.f1));
            prop_assert!(close(a.recall, b.precision) && close(a.precision, b.recall));
        }
        prop_assert!(close(conll_f1(&pk, &pr, true), conll_oracle(&k, &r)));
    }
}
