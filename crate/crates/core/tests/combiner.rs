mod common;

use std::collections::BTreeSet;

use anaphora::combiner::{
    combine_pronoun_partition, compatibility_filter, cosine, drops_first, filter_partition, merge_singletons,
};
use anaphora::corpus::{Document, Partition, Span};
use anaphora::embeddings::{EmbeddingStore, Matrix};
use anaphora::toy;
use common::*;

fn sets(p: &Partition<u32>) -> BTreeSet<BTreeSet<u32>> {
    p.clusters().cloned().collect()
}

#[test]
fn merge_singletons_over_every_pair_of_small_partitions() {
    let all = all_partial_partitions(5);
    let parts: Vec<Partition<u32>> = all.iter().map(partition).collect();
    let mut pairs = 0;
    for base in &parts {
        let taken = base.mentions();
        for source in &parts {
            let out = merge_singletons(base, source);
            let got = sets(&out);
            let base_sets = sets(base);
            assert!(base_sets.is_subset(&got));
            let added: BTreeSet<BTreeSet<u32>> = got.difference(&base_sets).cloned().collect();
            let expected: BTreeSet<BTreeSet<u32>> = source
                .clusters()
                .filter(|c| c.len() == 1 && c.iter().all(|m| !taken.contains(m)))
                .cloned()
                .collect();
            assert_eq!(added, expected, "base {base:?} source {source:?}");
            pairs += 1;
        }
    }
    assert_eq!(pairs, 203 * 203);
}

#[test]
fn pronoun_partition_over_every_pair_of_small_partitions() {
    // Mentions 0 and 1 are pronouns.
    let is_pronoun = |m: &u32| *m < 2;
    let parts: Vec<Partition<u32>> = all_partial_partitions(5).iter().map(partition).collect();
    for a in &parts {
        for b in &parts {
            let out = sets(&combine_pronoun_partition(a, b, is_pronoun));
            let kept: BTreeSet<BTreeSet<u32>> =
                a.clusters().filter(|c| !c.iter().any(is_pronoun)).cloned().collect();
            assert!(kept.is_subset(&out));
            let claimed: BTreeSet<u32> = kept.iter().flatten().copied().collect();
            for c in out.difference(&kept) {
                // Whatever is not a kept cluster of `a` comes from a singleton
                // or pronoun cluster of `b`, minus mentions `a` claimed.
                let origin = b.cluster_of(c.iter().next().unwrap()).unwrap();
                assert!(origin.len() == 1 || origin.iter().any(is_pronoun));
                let expected: BTreeSet<u32> = origin.difference(&claimed).copied().collect();
                assert_eq!(c, &expected);
            }
        }
    }
}

#[test]
fn drop_rule_compares_against_the_mean_of_the_rest() {
    assert!(!drops_first(0.5, &[]));
    assert!(drops_first(0.1, &[0.5, 0.7]));
    assert!(!drops_first(0.55, &[0.6, 0.7]));
    assert!((cosine(&[1.0, 0.0], &[0.0, 2.0])).abs() < 1e-12);
    assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
}

/// "the plan ... it ... the idea ... it": the first pronoun's vector is
/// far from `the plan` and close to `the idea`.
fn filter_fixture(noun_like_rest: bool) -> (Document, EmbeddingStore, Vec<Span>) {
    let doc = toy::parse_marked("f", &[("A", "[the plan]x is done . [it]x works ."), ("B", "[the idea]x , [it]x is good .")]);
    let spans: Vec<Span> = doc.mentions.iter().map(|m| m.span).collect();
    let counts = toy::subtoken_counts(&doc);
    let ranges: Vec<std::ops::Range<usize>> = (0..doc.len()).map(|i| i..i + 1).collect();
    assert!(counts.iter().all(|c| *c == 1));
    let mut data = Vec::new();
    for i in 0..doc.len() {
        let in_first = spans[0].contains(i);
        let v = if in_first && !noun_like_rest { [0.0, 1.0] } else { [1.0, 0.1] };
        data.extend(v);
    }
    let store = EmbeddingStore::from_parts(
        "f".into(),
        vec![("glove".into(), Matrix { rows: doc.len(), dim: 2, data }, None)],
        ranges,
        toy::annotations(&doc),
    )
    .unwrap();
    (doc, store, spans)
}

#[test]
fn filter_drops_a_dissimilar_first_noun() {
    let (doc, store, spans) = filter_fixture(false);
    let out = compatibility_filter(&spans, &doc, &store, "glove").unwrap();
    assert_eq!(out, spans[1..].to_vec());
    let (doc, store, spans) = filter_fixture(true);
    assert_eq!(compatibility_filter(&spans, &doc, &store, "glove").unwrap(), spans);
}

#[test]
fn filter_is_idempotent() {
    for like in [false, true] {
        let (doc, store, spans) = filter_fixture(like);
        let p = Partition::new(vec![spans.clone()]).unwrap();
        let once = filter_partition(&p, &doc, &store, "glove").unwrap();
        let twice = filter_partition(&once, &doc, &store, "glove").unwrap();
        assert_eq!(once, twice);
    }
}
