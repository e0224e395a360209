//! Segment construction, gold labels and class balancing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{AnaphorKind, DiscourseStatus, Document, Mention, Span};
use crate::lexicon;

pub const DEFAULT_SEGMENT_LIMIT: usize = 256;

/// Anaphor classes in type-classifier output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AnaphorClass {
    #[serde(rename = "DD")]
    DiscourseDeixis,
    #[serde(rename = "ID")]
    Identity,
    #[serde(rename = "NONREF")]
    NonReferential,
}

impl AnaphorClass {
    pub const ALL: [AnaphorClass; 3] = [AnaphorClass::DiscourseDeixis, AnaphorClass::Identity, AnaphorClass::NonReferential];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            AnaphorClass::DiscourseDeixis => "DD",
            AnaphorClass::Identity => "ID",
            AnaphorClass::NonReferential => "NONREF",
        }
    }

    pub fn anaphor_kind(self) -> AnaphorKind {
        match self {
            AnaphorClass::DiscourseDeixis => AnaphorKind::DiscourseDeixis,
            AnaphorClass::Identity => AnaphorKind::Identity,
            AnaphorClass::NonReferential => AnaphorKind::NonReferential,
        }
    }
}

impl fmt::Display for AnaphorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Token ordinals of every `this`, `that`, `it` and `which`.
pub fn candidate_anaphors(doc: &Document) -> Vec<usize> {
    doc.tokens
        .iter()
        .filter(|t| lexicon::is_deixis_form(&t.surface))
        .map(|t| t.index)
        .collect()
}

/// A window around exactly one anaphor candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub doc_id: String,
    pub anaphor: usize,
    /// Token window, inclusive.
    pub tokens: Span,
    /// Document subtoken range covered by the window.
    pub subtokens: Range<usize>,
    /// Sentences inside the window; the first may be clipped.
    pub sentences: Vec<Span>,
}

/// Cumulative subtoken offsets: `offsets[i]..offsets[i + 1]` belongs to token `i`.
pub fn subtoken_offsets(doc: &Document) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(doc.len() + 1);
    let mut at = 0;
    offsets.push(0);
    for t in &doc.tokens {
        at += t.subtoken_count;
        offsets.push(at);
    }
    offsets
}

/// One segment per anaphor candidate. The window ends with the anaphor's
/// sentence and takes whole preceding sentences while the total stays
/// within `limit` subtokens. An anaphor sentence longer than the limit is
/// clipped on the left (and, if the anaphor alone cannot fit with the rest
/// of its sentence, on the right).
pub fn build_segments(doc: &Document, limit: usize) -> Vec<Segment> {
    build_segments_at(doc, &candidate_anaphors(doc), limit)
}

/// Like [`build_segments`] for an explicit list of anaphor tokens.
pub fn build_segments_at(doc: &Document, anaphors: &[usize], limit: usize) -> Vec<Segment> {
    let offsets = subtoken_offsets(doc);
    let size = |a: usize, b: usize| offsets[b + 1] - offsets[a];
    let sentences = doc.sentences();
    let sentence_of = doc.sentence_index();
    anaphors
        .iter()
        .map(|&anaphor| {
            let k = sentence_of[anaphor];
            let own = sentences[k];
            let (start, end, included) = if size(own.start, own.end) > limit {
                log::warn!(
                    "{}: sentence of anaphor {anaphor} has {} subtokens, clipping to {limit}",
                    doc.id,
                    size(own.start, own.end)
                );
                match (own.start..=anaphor).find(|&i| size(i, own.end) <= limit) {
                    Some(start) => (start, own.end, vec![Span::new(start, own.end)]),
                    None => {
                        let end = (anaphor..=own.end).rev().find(|&j| size(anaphor, j) <= limit).unwrap_or(anaphor);
                        (anaphor, end, vec![Span::new(anaphor, end)])
                    }
                }
            } else {
                let mut start = own.start;
                let mut included = vec![own];
                for prev in sentences[..k].iter().rev() {
                    if size(prev.start, own.end) > limit {
                        break;
                    }
                    start = prev.start;
                    included.insert(0, *prev);
                }
                (start, own.end, included)
            };
            Segment {
                doc_id: doc.id.clone(),
                anaphor,
                tokens: Span::new(start, end),
                subtokens: offsets[start]..offsets[end + 1],
                sentences: included,
            }
        })
        .collect()
}

/// A segment with its gold class and the gold antecedent spans inside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSegment {
    pub segment: Segment,
    pub class: AnaphorClass,
    pub gold: Vec<Span>,
    /// Id of the annotated mention at the anaphor, if any.
    pub mention: Option<String>,
}

/// The shortest annotated mention starting at `token`.
pub fn mention_at(doc: &Document, token: usize) -> Option<&Mention> {
    doc.mentions
        .iter()
        .filter(|m| m.span.start == token)
        .min_by_key(|m| (m.span.len(), m.id.clone()))
}

/// Class of the anaphor: discourse deixis if its mention is typed so and
/// not discourse-new, identity if it is typed identity or belongs to an
/// entity, non-referential otherwise. Gold antecedents are the deixis link
/// targets (every span of a split antecedent) or the earlier coreferent
/// mentions, restricted to spans inside the window that do not contain
/// the anaphor.
pub fn label_segment(doc: &Document, segment: &Segment) -> LabeledSegment {
    label_for_mention(doc, segment, mention_at(doc, segment.anaphor))
}

/// Labels `segment` from an explicitly chosen anaphor mention.
pub fn label_for_mention(doc: &Document, segment: &Segment, m: Option<&Mention>) -> LabeledSegment {
    let class = match m {
        Some(m) if m.anaphor_kind == Some(AnaphorKind::DiscourseDeixis) && m.discourse_status != Some(DiscourseStatus::New) => {
            AnaphorClass::DiscourseDeixis
        }
        Some(m) if m.anaphor_kind == Some(AnaphorKind::Identity) || (m.anaphor_kind.is_none() && m.gold_entity.is_some()) => {
            AnaphorClass::Identity
        }
        _ => AnaphorClass::NonReferential,
    };
    let usable = |s: &Span| segment.tokens.contains_span(s) && !s.contains(segment.anaphor);
    let mut gold: Vec<Span> = match (class, m) {
        (AnaphorClass::DiscourseDeixis, Some(m)) => doc
            .deixis
            .iter()
            .filter(|l| l.anaphor == m.id)
            .filter_map(|l| doc.mention(&l.antecedent))
            .flat_map(|a| a.spans().collect::<Vec<_>>())
            .filter(usable)
            .collect(),
        (AnaphorClass::Identity, Some(m)) => match &m.gold_entity {
            Some(e) => doc
                .mentions
                .iter()
                .filter(|o| o.id != m.id && o.gold_entity.as_ref() == Some(e) && o.span.start < segment.anaphor)
                .map(|o| o.span)
                .filter(usable)
                .collect(),
            None => Vec::new(),
        },
        _ => Vec::new(),
    };
    gold.sort();
    gold.dedup();
    LabeledSegment { segment: segment.clone(), class, gold, mention: m.map(|m| m.id.clone()) }
}

pub fn labeled_segments(doc: &Document, limit: usize) -> Vec<LabeledSegment> {
    build_segments(doc, limit).iter().map(|s| label_segment(doc, s)).collect()
}

/// Annotated discourse-deixis anaphors (typed `dd`, not discourse-new),
/// paired with the token that stands for each of them.
pub fn gold_anaphors(doc: &Document, head: impl Fn(Span) -> usize) -> Vec<(&Mention, usize)> {
    doc.mentions
        .iter()
        .filter(|m| m.anaphor_kind == Some(AnaphorKind::DiscourseDeixis) && m.discourse_status != Some(DiscourseStatus::New))
        .map(|m| (m, head(m.span)))
        .collect()
}

/// One labeled segment per annotated anaphor, whatever its surface form.
pub fn gold_labeled_segments(doc: &Document, limit: usize, head: impl Fn(Span) -> usize) -> Vec<LabeledSegment> {
    let anaphors = gold_anaphors(doc, head);
    let tokens: Vec<usize> = anaphors.iter().map(|(_, t)| *t).collect();
    build_segments_at(doc, &tokens, limit)
        .iter()
        .zip(&anaphors)
        .map(|(s, (m, _))| label_for_mention(doc, s, Some(m)))
        .collect()
}

/// Every span the resolver scores for `segment`: token spans of at most
/// `max_width` subtokens, every sentence and every run of consecutive
/// sentences, minus spans containing the anaphor. Sorted by start, then end.
pub fn enumerate_candidates(doc: &Document, segment: &Segment, max_width: usize) -> Vec<Span> {
    let offsets = subtoken_offsets(doc);
    let w = segment.tokens;
    let mut out = BTreeSet::new();
    for i in w.start..=w.end {
        for j in i..=w.end {
            if offsets[j + 1] - offsets[i] > max_width {
                break;
            }
            out.insert(Span::new(i, j));
        }
    }
    for (a, first) in segment.sentences.iter().enumerate() {
        for last in &segment.sentences[a..] {
            out.insert(Span::new(first.start, last.end));
        }
    }
    out.into_iter().filter(|s| !s.contains(segment.anaphor)).collect()
}

/// Keeps a uniformly random subset of every class, sized to the rarest
/// class that occurs, and returns the survivors in their original order.
pub fn undersample<T: Clone>(items: &[T], class: impl Fn(&T) -> AnaphorClass, seed: u64) -> Vec<T> {
    let mut by_class: BTreeMap<AnaphorClass, Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        by_class.entry(class(it)).or_default().push(i);
    }
    let Some(keep) = by_class.values().map(Vec::len).min() else { return Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(keep * by_class.len());
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
        chosen.extend_from_slice(&idx[..keep]);
    }
    chosen.sort_unstable();
    chosen.into_iter().map(|i| items[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms_are_found_case_insensitively() {
        let d = Document::from_utterances("d", &[("A", "That is it ."), ("B", "THIS or This or this")]);
        assert_eq!(candidate_anaphors(&d), vec![0, 2, 4, 6, 8]);
        let none = Document::from_utterances("d", &[("A", "no forms here")]);
        assert!(candidate_anaphors(&none).is_empty());
    }

    #[test]
    fn first_sentence_candidate_gets_its_sentence_only() {
        let d = Document::from_utterances("d", &[("A", "I saw it . Then we left .")]);
        let s = build_segments(&d, 256);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens, Span::new(0, 3));
    }

    #[test]
    fn undersampling_balances_exactly() {
        let mut items = Vec::new();
        for (c, n) in [(AnaphorClass::NonReferential, 43), (AnaphorClass::Identity, 40), (AnaphorClass::DiscourseDeixis, 14)] {
            items.extend((0..n).map(|_| c));
        }
        let out = undersample(&items, |c| *c, 5);
        for c in AnaphorClass::ALL {
            assert_eq!(out.iter().filter(|x| **x == c).count(), 14);
        }
        assert_eq!(out, undersample(&items, |c| *c, 5));
    }
}
