//! Heuristics for combining coreference predictions of several systems.
//! Mentions are identified across systems by their exact token span.

use std::collections::BTreeSet;

use crate::corpus::{Document, Partition, Span};
use crate::embeddings::{EmbeddingError, EmbeddingStore};
use crate::lexicon;

/// Margin by which the pronoun/noun similarity must undercut the pronoun's
/// mean similarity to the rest of the cluster before the noun is dropped.
pub const SIMILARITY_MARGIN: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum CombineError {
    #[error("documents differ: {0}")]
    DocumentMismatch(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Keeps every cluster of `base` and adds each singleton of `source` whose
/// mention `base` does not already contain.
pub fn merge_singletons<K: Ord + Clone + std::fmt::Debug>(base: &Partition<K>, source: &Partition<K>) -> Partition<K> {
    let taken = base.mentions();
    let added = source
        .singletons()
        .filter(|m| !taken.contains(*m))
        .map(|m| vec![m.clone()]);
    let clusters = base.clusters().map(|c| c.iter().cloned().collect::<Vec<_>>()).chain(added);
    Partition::new(clusters).expect("added singletons are disjoint from base")
}

/// Pronoun-free clusters of `a`, plus the singletons and pronoun-bearing
/// clusters of `b`. A mention claimed by a kept cluster of `a` is removed
/// from `b`'s side.
pub fn combine_pronoun_partition<K: Ord + Clone + std::fmt::Debug>(
    a: &Partition<K>,
    b: &Partition<K>,
    is_pronoun: impl Fn(&K) -> bool,
) -> Partition<K> {
    let kept_a: Vec<&BTreeSet<K>> = a.clusters().filter(|c| !c.iter().any(&is_pronoun)).collect();
    let claimed: BTreeSet<&K> = kept_a.iter().flat_map(|c| c.iter()).collect();
    let from_b = b
        .clusters()
        .filter(|c| c.len() == 1 || c.iter().any(&is_pronoun))
        .map(|c| c.iter().filter(|m| !claimed.contains(m)).cloned().collect::<Vec<_>>())
        .filter(|c| !c.is_empty());
    let clusters = kept_a.iter().map(|c| c.iter().cloned().collect::<Vec<_>>()).chain(from_b);
    Partition::new(clusters).expect("overlap removed")
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Whether the filter drops the first mention, given the similarity of the
/// first pronoun to the first noun and to every other mention.
pub fn drops_first(noun_similarity: f64, other_similarities: &[f64]) -> bool {
    if other_similarities.is_empty() {
        return false;
    }
    let mean = other_similarities.iter().sum::<f64>() / other_similarities.len() as f64;
    noun_similarity < mean - SIMILARITY_MARGIN
}

/// A single-token personal pronoun.
pub fn is_pronoun_span(doc: &Document, span: Span) -> bool {
    span.len() == 1 && lexicon::is_personal_pronoun(&doc.tokens[span.start].surface)
}

/// Drops the first mention of a cluster (sorted by position) when it is a
/// noun phrase followed by a pronoun that resembles the rest of the
/// cluster much more than it resembles that noun phrase. Number
/// disagreement between the two is only logged.
pub fn compatibility_filter(
    cluster: &[Span],
    doc: &Document,
    store: &EmbeddingStore,
    space: &str,
) -> Result<Vec<Span>, EmbeddingError> {
    if cluster.len() < 3 || is_pronoun_span(doc, cluster[0]) || !is_pronoun_span(doc, cluster[1]) {
        return Ok(cluster.to_vec());
    }
    let (noun, pronoun) = (cluster[0], cluster[1]);
    let noun_plural = store.annotation(store.head_token(noun)).is_plural_noun();
    if let Some(plural) = lexicon::pronoun_is_plural(&doc.tokens[pronoun.start].surface) {
        if plural != noun_plural {
            log::info!("{}: number mismatch between {noun} and {pronoun}", doc.id);
        }
    }
    let p = store.span_vector(space, pronoun)?;
    let first = cosine(&p, &store.span_vector(space, noun)?);
    let others = cluster[2..]
        .iter()
        .map(|s| Ok(cosine(&p, &store.span_vector(space, *s)?)))
        .collect::<Result<Vec<_>, EmbeddingError>>()?;
    Ok(if drops_first(first, &others) { cluster[1..].to_vec() } else { cluster.to_vec() })
}

/// Applies [`compatibility_filter`] to every cluster of `partition`.
pub fn filter_partition(
    partition: &Partition<Span>,
    doc: &Document,
    store: &EmbeddingStore,
    space: &str,
) -> Result<Partition<Span>, EmbeddingError> {
    let clusters = partition
        .clusters()
        .map(|c| compatibility_filter(&c.iter().copied().collect::<Vec<_>>(), doc, store, space))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Partition::new(clusters).expect("filtering only removes mentions"))
}

pub fn check_same_document(a: &Document, b: &Document) -> Result<(), CombineError> {
    if a.id != b.id {
        return Err(CombineError::DocumentMismatch(format!("`{}` vs `{}`", a.id, b.id)));
    }
    let surfaces = |d: &Document| d.tokens.iter().map(|t| t.surface.clone()).collect::<Vec<_>>();
    if surfaces(a) != surfaces(b) {
        return Err(CombineError::DocumentMismatch(format!("`{}` is tokenized differently", a.id)));
    }
    Ok(())
}
