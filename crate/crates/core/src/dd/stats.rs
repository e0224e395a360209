//! Class proportions and anaphor context distributions over a corpus.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::segments::{labeled_segments, AnaphorClass};
use crate::corpus::Document;
use crate::embeddings::EmbeddingStore;

/// Counts per anaphor class, plus (given annotations) the lemma of each
/// anaphor's parent and its `POS/DEP` pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DdStats {
    pub segments: usize,
    pub classes: BTreeMap<AnaphorClass, usize>,
    pub parents: BTreeMap<AnaphorClass, BTreeMap<String, usize>>,
    pub pos_dep: BTreeMap<AnaphorClass, BTreeMap<String, usize>>,
}

const ROOT: &str = "<root>";

impl DdStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_document(&mut self, doc: &Document, store: Option<&EmbeddingStore>, limit: usize) {
        let mut doc = doc.clone();
        if let Some(s) = store {
            if let Err(e) = s.apply_subtoken_counts(&mut doc) {
                log::warn!("{e}; keeping the corpus subtoken counts");
            }
        }
        for seg in labeled_segments(&doc, limit) {
            self.segments += 1;
            *self.classes.entry(seg.class).or_default() += 1;
            let Some(store) = store.filter(|s| s.token_count() == doc.len()) else { continue };
            let a = store.annotation(seg.segment.anaphor);
            let parent = match a.parent {
                Some(p) => {
                    let pa = store.annotation(p);
                    pa.lemma.clone().unwrap_or_else(|| doc.tokens[p].surface.to_lowercase())
                }
                None => ROOT.to_string(),
            };
            *self.parents.entry(seg.class).or_default().entry(parent).or_default() += 1;
            *self.pos_dep.entry(seg.class).or_default().entry(format!("{}/{}", a.pos, a.dep)).or_default() += 1;
        }
    }

    pub fn count(&self, class: AnaphorClass) -> usize {
        self.classes.get(&class).copied().unwrap_or(0)
    }

    /// Percentage of segments in `class`.
    pub fn percent(&self, class: AnaphorClass) -> f64 {
        if self.segments == 0 {
            0.0
        } else {
            100.0 * self.count(class) as f64 / self.segments as f64
        }
    }

    /// Text tables; distributions list the `top` most frequent entries.
    pub fn report(&self, top: usize) -> String {
        let order = [AnaphorClass::NonReferential, AnaphorClass::Identity, AnaphorClass::DiscourseDeixis];
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:>8} {:>8}", "class", "segments", "percent");
        for c in order {
            let _ = writeln!(out, "{:<8} {:>8} {:>8.2}", c.name(), self.count(c), self.percent(c));
        }
        let total = if self.segments == 0 { 0.0 } else { 100.0 };
        let _ = writeln!(out, "{:<8} {:>8} {:>8.2}", "total", self.segments, total);
        for (title, table) in [("parent lemma", &self.parents), ("POS/DEP", &self.pos_dep)] {
            if table.is_empty() {
                continue;
            }
            let _ = writeln!(out, "\n{title}");
            for c in order {
                let Some(counts) = table.get(&c) else { continue };
                let n: usize = counts.values().sum();
                let mut rows: Vec<(&String, &usize)> = counts.iter().collect();
                rows.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
                for (k, v) in rows.into_iter().take(top) {
                    let _ = writeln!(out, "{:<8} {:<20} {:>6} {:>7.2}", c.name(), k, v, 100.0 * *v as f64 / n as f64);
                }
            }
        }
        out
    }
}
