//! Dialogue documents in a 12-column, bracket-annotated text format.
//!
//! Each document is framed by `#begin document <id>` / `#end document` and
//! holds one tab-separated row per token:
//!
//! | # | column     | content                                               |
//! |---|------------|-------------------------------------------------------|
//! | 1 | doc        | document id (must equal the header id)                |
//! | 2 | index      | 0-based token ordinal                                 |
//! | 3 | form       | surface string                                        |
//! | 4 | speaker    | speaker label                                         |
//! | 5 | utterance  | utterance ordinal (non-decreasing)                    |
//! | 6 | markables  | `(m1` / `m1)` / `(m1)`; `(+m1` adds another span to m1 |
//! | 7 | identity   | `m1=e4` entity assignment                             |
//! | 8 | deixis     | `m5>m2` discourse-deixis anaphor > antecedent markable |
//! | 9 | bridging   | `m7>m3` bridging anaphor > antecedent                  |
//! |10 | referring  | `m1=Y` / `m1=N`                                        |
//! |11 | type       | `m1=<kind>/<status>`, `-` for an absent part           |
//! |12 | misc       | free text                                             |
//!
//! Multiple entries in one cell are joined with `|`; an empty cell is `_`.
//! Attribute entries are written on the row where the mention (or the
//! link's anaphor) starts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

pub const COLUMNS: usize = 12;
const EMPTY: &str = "_";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: unbalanced brackets for markable `{id}`")]
    UnbalancedBrackets { line: usize, id: String },
    #[error("duplicate markable id `{id}`")]
    DuplicateMentionId { id: String },
    #[error("line {line}: reference to unknown markable `{id}`")]
    UnknownMention { line: usize, id: String },
    #[error("line {line}: conflicting annotation for `{id}`")]
    DuplicateAttribute { line: usize, id: String },
    #[error("invalid link {anaphor} > {antecedent}")]
    InvalidLink { anaphor: String, antecedent: String },
    #[error("line {line}: {reason}")]
    Framing { line: usize, reason: String },
    #[error("invalid partition: {0}")]
    Partition(String),
}

/// Inclusive token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn single(index: usize) -> Self {
        Span { start: index, end: index }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index <= self.end
    }

    pub fn contains_span(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    pub speaker: String,
    pub utterance_index: usize,
    /// Encoder subtokens covered by this token; 1 until an embedding
    /// manifest supplies the real count.
    pub subtoken_count: usize,
    pub misc: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnaphorKind {
    Identity,
    DiscourseDeixis,
    Bridging,
    NonReferential,
}

impl AnaphorKind {
    fn code(self) -> &'static str {
        match self {
            AnaphorKind::Identity => "identity",
            AnaphorKind::DiscourseDeixis => "dd",
            AnaphorKind::Bridging => "bridging",
            AnaphorKind::NonReferential => "nonref",
        }
    }

    fn from_code(s: &str) -> Option<Self> {
        Some(match s {
            "identity" => AnaphorKind::Identity,
            "dd" => AnaphorKind::DiscourseDeixis,
            "bridging" => AnaphorKind::Bridging,
            "nonref" => AnaphorKind::NonReferential,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiscourseStatus {
    Old,
    New,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub id: String,
    pub span: Span,
    /// Further spans of a discontinuous markable (split antecedents).
    pub extra_spans: Vec<Span>,
    pub gold_entity: Option<String>,
    pub anaphor_kind: Option<AnaphorKind>,
    pub discourse_status: Option<DiscourseStatus>,
    pub referring: Option<bool>,
}

impl Mention {
    pub fn new(id: impl Into<String>, span: Span) -> Self {
        Mention {
            id: id.into(),
            span,
            extra_spans: Vec::new(),
            gold_entity: None,
            anaphor_kind: None,
            discourse_status: None,
            referring: None,
        }
    }

    pub fn with_entity(mut self, entity: impl Into<String>) -> Self {
        self.gold_entity = Some(entity.into());
        self
    }

    /// All spans of the markable, primary span first.
    pub fn spans(&self) -> impl Iterator<Item = Span> + '_ {
        std::iter::once(self.span).chain(self.extra_spans.iter().copied())
    }

    /// Referring unless explicitly flagged otherwise or typed non-referential.
    pub fn is_referring(&self) -> bool {
        self.referring
            .unwrap_or(self.anaphor_kind != Some(AnaphorKind::NonReferential))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Link {
    pub anaphor: String,
    pub antecedent: String,
}

pub type BridgingLink = Link;
pub type DeixisLink = Link;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<Token>,
    /// Sorted by (start, end, id).
    pub mentions: Vec<Mention>,
    pub bridging: Vec<BridgingLink>,
    pub deixis: Vec<DeixisLink>,
}

/// A set of pairwise-disjoint, non-empty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition<K: Ord> {
    clusters: BTreeSet<BTreeSet<K>>,
}

/// Clusters of mention ids.
pub type EntitySet = Partition<String>;

impl<K: Ord + Clone + fmt::Debug> Partition<K> {
    pub fn empty() -> Self {
        Partition { clusters: BTreeSet::new() }
    }

    pub fn new<I, C>(clusters: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = K>,
    {
        let mut seen = BTreeSet::new();
        let mut out = BTreeSet::new();
        for cluster in clusters {
            let cluster: BTreeSet<K> = cluster.into_iter().collect();
            if cluster.is_empty() {
                return Err(CorpusError::Partition("empty cluster".into()));
            }
            for k in &cluster {
                if !seen.insert(k.clone()) {
                    return Err(CorpusError::Partition(format!("{k:?} in two clusters")));
                }
            }
            out.insert(cluster);
        }
        Ok(Partition { clusters: out })
    }

    pub fn clusters(&self) -> impl Iterator<Item = &BTreeSet<K>> {
        self.clusters.iter()
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn mentions(&self) -> BTreeSet<K> {
        self.clusters.iter().flatten().cloned().collect()
    }

    pub fn cluster_of(&self, key: &K) -> Option<&BTreeSet<K>> {
        self.clusters.iter().find(|c| c.contains(key))
    }

    pub fn singletons(&self) -> impl Iterator<Item = &K> {
        self.clusters
            .iter()
            .filter(|c| c.len() == 1)
            .filter_map(|c| c.iter().next())
    }

    /// Drops every cluster of size one; larger clusters are kept as-is.
    pub fn strip_singletons(&self) -> Self {
        Partition {
            clusters: self.clusters.iter().filter(|c| c.len() > 1).cloned().collect(),
        }
    }

    pub fn map<K2: Ord + Clone + fmt::Debug>(
        &self,
        mut f: impl FnMut(&K) -> K2,
    ) -> Result<Partition<K2>, CorpusError> {
        Partition::new(self.clusters.iter().map(|c| c.iter().map(&mut f).collect::<Vec<_>>()))
    }
}

pub fn strip_singletons<K: Ord + Clone + fmt::Debug>(e: &Partition<K>) -> Partition<K> {
    e.strip_singletons()
}

impl Document {
    pub fn new(id: impl Into<String>, tokens: Vec<Token>) -> Self {
        Document {
            id: id.into(),
            tokens,
            mentions: Vec::new(),
            bridging: Vec::new(),
            deixis: Vec::new(),
        }
    }

    /// Builds a document from whitespace-separated utterances, one speaker
    /// per utterance.
    pub fn from_utterances(id: &str, utterances: &[(&str, &str)]) -> Self {
        let mut tokens = Vec::new();
        for (u, (speaker, text)) in utterances.iter().enumerate() {
            for word in text.split_whitespace() {
                tokens.push(Token {
                    index: tokens.len(),
                    surface: word.to_string(),
                    speaker: speaker.to_string(),
                    utterance_index: u,
                    subtoken_count: 1,
                    misc: None,
                });
            }
        }
        Document::new(id, tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Restores canonical ordering of mentions and links.
    pub fn normalize(&mut self) {
        self.mentions
            .sort_by(|a, b| (a.span, &a.id).cmp(&(b.span, &b.id)));
        self.bridging.sort();
        self.deixis.sort();
    }

    pub fn mention(&self, id: &str) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.id == id)
    }

    pub fn span_text(&self, span: Span) -> String {
        self.tokens[span.start..=span.end]
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Sentence spans: a new sentence starts at every utterance change and
    /// after `.`, `?` or `!`.
    pub fn sentences(&self) -> Vec<Span> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, tok) in self.tokens.iter().enumerate() {
            let last = i + 1 == self.tokens.len();
            let boundary = last
                || self.tokens[i + 1].utterance_index != tok.utterance_index
                || crate::lexicon::is_sentence_final(&tok.surface);
            if boundary {
                out.push(Span::new(start, i));
                start = i + 1;
            }
        }
        out
    }

    /// Sentence ordinal of every token.
    pub fn sentence_index(&self) -> Vec<usize> {
        let mut idx = vec![0; self.tokens.len()];
        for (s, span) in self.sentences().iter().enumerate() {
            for i in span.start..=span.end {
                idx[i] = s;
            }
        }
        idx
    }

    /// Gold identity clusters over mention ids.
    pub fn entity_set(&self) -> EntitySet {
        let mut by_entity: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for m in &self.mentions {
            if let Some(e) = &m.gold_entity {
                by_entity.entry(e).or_default().push(m.id.clone());
            }
        }
        Partition::new(by_entity.into_values()).expect("mention ids are unique")
    }

    /// Gold identity clusters keyed by primary span.
    pub fn span_partition(&self) -> Result<Partition<Span>, CorpusError> {
        let spans: HashMap<&str, Span> =
            self.mentions.iter().map(|m| (m.id.as_str(), m.span)).collect();
        self.entity_set().map(|id| spans[id.as_str()])
    }

    /// Replaces identity annotation with `partition`: every mention it
    /// covers gets entity `e<k>`, all other mentions lose their entity.
    pub fn set_entities(&mut self, partition: &EntitySet) {
        let mut assign: HashMap<&str, String> = HashMap::new();
        for (k, cluster) in partition.clusters().enumerate() {
            for id in cluster {
                assign.insert(id.as_str(), format!("e{k}"));
            }
        }
        for m in &mut self.mentions {
            m.gold_entity = assign.get(m.id.as_str()).cloned();
        }
    }

    /// A copy of this document's tokens whose only annotation is `partition`:
    /// one mention `m<k>` per span in span order, entity `e<c>` per cluster.
    pub fn with_span_partition(&self, partition: &Partition<Span>) -> Document {
        let mut entity: BTreeMap<Span, usize> = BTreeMap::new();
        for (c, cluster) in partition.clusters().enumerate() {
            for s in cluster {
                entity.insert(*s, c);
            }
        }
        let mut out = Document::new(self.id.clone(), self.tokens.clone());
        out.mentions = entity
            .iter()
            .enumerate()
            .map(|(k, (span, c))| Mention::new(format!("m{k}"), *span).with_entity(format!("e{c}")))
            .collect();
        out
    }

    /// Checks every structural invariant the parser enforces.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut ids = BTreeSet::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i {
                return Err(CorpusError::MalformedRow {
                    line: i,
                    reason: format!("token index {} at position {i}", t.index),
                });
            }
            if t.subtoken_count == 0 {
                return Err(CorpusError::MalformedRow { line: i, reason: "zero subtokens".into() });
            }
            if i > 0 && t.utterance_index < self.tokens[i - 1].utterance_index {
                return Err(CorpusError::MalformedRow {
                    line: i,
                    reason: "utterance index decreases".into(),
                });
            }
        }
        for m in &self.mentions {
            if !ids.insert(m.id.as_str()) {
                return Err(CorpusError::DuplicateMentionId { id: m.id.clone() });
            }
            for s in m.spans() {
                if s.start > s.end || s.end >= self.tokens.len() {
                    return Err(CorpusError::UnbalancedBrackets { line: s.start, id: m.id.clone() });
                }
            }
        }
        for link in self.bridging.iter().chain(&self.deixis) {
            if link.anaphor == link.antecedent
                || !ids.contains(link.anaphor.as_str())
                || !ids.contains(link.antecedent.as_str())
            {
                return Err(CorpusError::InvalidLink {
                    anaphor: link.anaphor.clone(),
                    antecedent: link.antecedent.clone(),
                });
            }
        }
        Ok(())
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id
            .chars()
            .any(|c| c.is_whitespace() || "()|=>/+".contains(c))
}

fn split_cell(cell: &str) -> impl Iterator<Item = &str> {
    let entries = if cell == EMPTY { "" } else { cell };
    entries.split('|').filter(|e| !e.is_empty())
}

fn malformed(line: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedRow { line, reason: reason.into() }
}

#[derive(Default)]
struct Pending {
    mentions: BTreeMap<String, Mention>,
    open: HashMap<String, (usize, bool)>,
    entity: BTreeMap<String, (usize, String)>,
    referring: BTreeMap<String, (usize, bool)>,
    types: BTreeMap<String, (usize, Option<AnaphorKind>, Option<DiscourseStatus>)>,
    deixis: Vec<(usize, Link)>,
    bridging: Vec<(usize, Link)>,
}

fn parse_assignment(line: usize, entry: &str, sep: char) -> Result<(&str, &str), CorpusError> {
    let (id, value) = entry
        .split_once(sep)
        .ok_or_else(|| malformed(line, format!("expected `id{sep}value`, got `{entry}`")))?;
    if !valid_id(id) || value.is_empty() {
        return Err(malformed(line, format!("bad entry `{entry}`")));
    }
    Ok((id, value))
}

fn insert_once<V>(
    map: &mut BTreeMap<String, V>,
    line: usize,
    id: &str,
    value: V,
) -> Result<(), CorpusError> {
    if map.insert(id.to_string(), value).is_some() {
        return Err(CorpusError::DuplicateAttribute { line, id: id.to_string() });
    }
    Ok(())
}

impl Pending {
    fn open(&mut self, line: usize, token: usize, raw: &str) -> Result<(), CorpusError> {
        let (continuation, id) = match raw.strip_prefix('+') {
            Some(rest) => (true, rest),
            None => (false, raw),
        };
        if !valid_id(id) {
            return Err(malformed(line, format!("bad markable id `{raw}`")));
        }
        if self.open.contains_key(id) {
            return Err(CorpusError::DuplicateMentionId { id: id.to_string() });
        }
        let known = self.mentions.contains_key(id);
        if known && !continuation {
            return Err(CorpusError::DuplicateMentionId { id: id.to_string() });
        }
        if !known && continuation {
            return Err(CorpusError::UnknownMention { line, id: id.to_string() });
        }
        self.open.insert(id.to_string(), (token, continuation));
        Ok(())
    }

    fn close(&mut self, line: usize, token: usize, id: &str) -> Result<(), CorpusError> {
        let (start, continuation) = self
            .open
            .remove(id)
            .ok_or_else(|| CorpusError::UnbalancedBrackets { line, id: id.to_string() })?;
        let span = Span::new(start, token);
        if continuation {
            self.mentions.get_mut(id).expect("checked on open").extra_spans.push(span);
        } else {
            self.mentions.insert(id.to_string(), Mention::new(id, span));
        }
        Ok(())
    }

    fn markables(&mut self, line: usize, token: usize, cell: &str) -> Result<(), CorpusError> {
        let mut closes = Vec::new();
        for entry in split_cell(cell) {
            let opens = entry.starts_with('(');
            let closes_here = entry.ends_with(')');
            let id = entry.trim_start_matches('(').trim_end_matches(')');
            if !opens && !closes_here {
                return Err(malformed(line, format!("bad markable entry `{entry}`")));
            }
            if opens {
                self.open(line, token, id)?;
            }
            if closes_here {
                closes.push(id.trim_start_matches('+').to_string());
            }
        }
        for id in closes {
            self.close(line, token, &id)?;
        }
        Ok(())
    }

    fn attributes(&mut self, line: usize, cols: &[&str]) -> Result<(), CorpusError> {
        for entry in split_cell(cols[6]) {
            let (id, e) = parse_assignment(line, entry, '=')?;
            insert_once(&mut self.entity, line, id, (line, e.to_string()))?;
        }
        for (cell, links) in [(cols[7], &mut self.deixis), (cols[8], &mut self.bridging)] {
            for entry in split_cell(cell) {
                let (a, b) = parse_assignment(line, entry, '>')?;
                if !valid_id(b) {
                    return Err(malformed(line, format!("bad link `{entry}`")));
                }
                links.push((line, Link { anaphor: a.to_string(), antecedent: b.to_string() }));
            }
        }
        for entry in split_cell(cols[9]) {
            let (id, flag) = parse_assignment(line, entry, '=')?;
            let flag = match flag {
                "Y" => true,
                "N" => false,
                _ => return Err(malformed(line, format!("referring flag `{flag}`"))),
            };
            insert_once(&mut self.referring, line, id, (line, flag))?;
        }
        for entry in split_cell(cols[10]) {
            let (id, value) = parse_assignment(line, entry, '=')?;
            let (kind, status) = value
                .split_once('/')
                .ok_or_else(|| malformed(line, format!("type entry `{entry}`")))?;
            let kind = match kind {
                "-" => None,
                k => Some(AnaphorKind::from_code(k).ok_or_else(|| malformed(line, format!("kind `{k}`")))?),
            };
            let status = match status {
                "-" => None,
                "old" => Some(DiscourseStatus::Old),
                "new" => Some(DiscourseStatus::New),
                s => return Err(malformed(line, format!("status `{s}`"))),
            };
            insert_once(&mut self.types, line, id, (line, kind, status))?;
        }
        Ok(())
    }

    fn finish(mut self, id: String, tokens: Vec<Token>, end_line: usize) -> Result<Document, CorpusError> {
        if let Some(open) = self.open.keys().min() {
            return Err(CorpusError::UnbalancedBrackets { line: end_line, id: open.clone() });
        }
        let unknown = |line: usize, id: &str| CorpusError::UnknownMention { line, id: id.to_string() };
        for (mid, (line, entity)) in std::mem::take(&mut self.entity) {
            let m = self.mentions.get_mut(&mid).ok_or_else(|| unknown(line, &mid))?;
            m.gold_entity = Some(entity);
        }
        for (mid, (line, flag)) in std::mem::take(&mut self.referring) {
            let m = self.mentions.get_mut(&mid).ok_or_else(|| unknown(line, &mid))?;
            m.referring = Some(flag);
        }
        for (mid, (line, kind, status)) in std::mem::take(&mut self.types) {
            let m = self.mentions.get_mut(&mid).ok_or_else(|| unknown(line, &mid))?;
            m.anaphor_kind = kind;
            m.discourse_status = status;
        }
        let links = |raw: Vec<(usize, Link)>| -> Result<Vec<Link>, CorpusError> {
            let mut out = Vec::with_capacity(raw.len());
            for (line, link) in raw {
                for id in [&link.anaphor, &link.antecedent] {
                    if !self.mentions.contains_key(id) {
                        return Err(unknown(line, id));
                    }
                }
                if link.anaphor == link.antecedent {
                    return Err(CorpusError::InvalidLink {
                        anaphor: link.anaphor,
                        antecedent: link.antecedent,
                    });
                }
                out.push(link);
            }
            Ok(out)
        };
        let deixis = links(std::mem::take(&mut self.deixis))?;
        let bridging = links(std::mem::take(&mut self.bridging))?;
        let mut doc = Document {
            id,
            tokens,
            mentions: self.mentions.into_values().collect(),
            bridging,
            deixis,
        };
        doc.normalize();
        Ok(doc)
    }
}

/// Parses every document in `text`.
pub fn parse_corpus(text: &str) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut current: Option<(String, Vec<Token>, Pending)> = None;
    let mut last_line = 0;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        last_line = line;
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(id) = raw.strip_prefix("#begin document ") {
            if current.is_some() {
                return Err(CorpusError::Framing { line, reason: "nested #begin document".into() });
            }
            let id = id.trim();
            if id.is_empty() {
                return Err(CorpusError::Framing { line, reason: "empty document id".into() });
            }
            current = Some((id.to_string(), Vec::new(), Pending::default()));
            continue;
        }
        if raw.starts_with("#end document") {
            let (id, tokens, pending) = current
                .take()
                .ok_or_else(|| CorpusError::Framing { line, reason: "#end without #begin".into() })?;
            docs.push(pending.finish(id, tokens, line)?);
            continue;
        }
        if raw.starts_with('#') {
            continue;
        }
        let (doc_id, tokens, pending) = current
            .as_mut()
            .ok_or_else(|| CorpusError::Framing { line, reason: "row outside a document".into() })?;
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != COLUMNS {
            return Err(malformed(line, format!("expected {COLUMNS} columns, found {}", cols.len())));
        }
        if cols[0] != doc_id.as_str() {
            return Err(malformed(line, format!("document id `{}` under header `{doc_id}`", cols[0])));
        }
        let index: usize = cols[1].parse().map_err(|_| malformed(line, "token index"))?;
        if index != tokens.len() {
            return Err(malformed(line, format!("token index {index}, expected {}", tokens.len())));
        }
        let utterance_index: usize = cols[4].parse().map_err(|_| malformed(line, "utterance index"))?;
        if tokens.last().is_some_and(|t: &Token| t.utterance_index > utterance_index) {
            return Err(malformed(line, "utterance index decreases"));
        }
        if cols[2].is_empty() || cols[3].is_empty() {
            return Err(malformed(line, "empty form or speaker"));
        }
        pending.markables(line, index, cols[5])?;
        pending.attributes(line, &cols)?;
        tokens.push(Token {
            index,
            surface: cols[2].to_string(),
            speaker: cols[3].to_string(),
            utterance_index,
            subtoken_count: 1,
            misc: (cols[11] != EMPTY).then(|| cols[11].to_string()),
        });
    }
    if let Some((id, _, pending)) = current {
        if let Some(open) = pending.open.keys().min() {
            return Err(CorpusError::UnbalancedBrackets { line: last_line, id: open.clone() });
        }
        return Err(CorpusError::Framing { line: last_line, reason: format!("document `{id}` not closed") });
    }
    Ok(docs)
}

/// Parses a stream holding exactly one document.
pub fn parse_document(text: &str) -> Result<Document, CorpusError> {
    let mut docs = parse_corpus(text)?;
    match docs.len() {
        1 => Ok(docs.pop().expect("length checked")),
        n => Err(CorpusError::Framing { line: 0, reason: format!("expected one document, found {n}") }),
    }
}

fn cell(entries: Vec<String>) -> String {
    if entries.is_empty() {
        EMPTY.to_string()
    } else {
        entries.join("|")
    }
}

pub fn write_document(doc: &Document) -> String {
    let n = doc.tokens.len();
    let mut opens: Vec<Vec<(Span, String)>> = vec![Vec::new(); n];
    let mut closes: Vec<Vec<(Span, String)>> = vec![Vec::new(); n];
    let mut singles: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut attrs: Vec<[Vec<String>; 5]> = vec![Default::default(); n];
    for m in &doc.mentions {
        for (k, s) in m.spans().enumerate() {
            let label = if k == 0 { m.id.clone() } else { format!("+{}", m.id) };
            if s.start == s.end {
                singles[s.start].push(label);
            } else {
                opens[s.start].push((s, label));
                closes[s.end].push((s, m.id.clone()));
            }
        }
        let row = &mut attrs[m.span.start];
        if let Some(e) = &m.gold_entity {
            row[0].push(format!("{}={e}", m.id));
        }
        if let Some(r) = m.referring {
            row[3].push(format!("{}={}", m.id, if r { "Y" } else { "N" }));
        }
        if m.anaphor_kind.is_some() || m.discourse_status.is_some() {
            let kind = m.anaphor_kind.map_or("-", AnaphorKind::code);
            let status = match m.discourse_status {
                None => "-",
                Some(DiscourseStatus::Old) => "old",
                Some(DiscourseStatus::New) => "new",
            };
            row[4].push(format!("{}={kind}/{status}", m.id));
        }
    }
    for (col, links) in [(1, &doc.deixis), (2, &doc.bridging)] {
        for link in links {
            if let Some(m) = doc.mention(&link.anaphor) {
                attrs[m.span.start][col].push(format!("{}>{}", link.anaphor, link.antecedent));
            }
        }
    }

    let mut out = format!("#begin document {}\n", doc.id);
    for (i, tok) in doc.tokens.iter().enumerate() {
        // Outer spans open first; inner spans close first.
        opens[i].sort_by(|a, b| b.0.end.cmp(&a.0.end).then_with(|| a.1.cmp(&b.1)));
        closes[i].sort_by(|a, b| b.0.start.cmp(&a.0.start).then_with(|| a.1.cmp(&b.1)));
        singles[i].sort();
        let mut marks: Vec<String> = opens[i].iter().map(|(_, id)| format!("({id}")).collect();
        marks.extend(singles[i].iter().map(|id| format!("({id})")));
        marks.extend(closes[i].iter().map(|(_, id)| format!("{id})")));
        let [ident, deixis, bridging, referring, types] = std::mem::take(&mut attrs[i]);
        let row = [
            doc.id.clone(),
            i.to_string(),
            tok.surface.clone(),
            tok.speaker.clone(),
            tok.utterance_index.to_string(),
            cell(marks),
            cell(ident),
            cell(deixis),
            cell(bridging),
            cell(referring),
            cell(types),
            tok.misc.clone().unwrap_or_else(|| EMPTY.to_string()),
        ];
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out.push_str("#end document\n");
    out
}

pub fn write_corpus(docs: &[Document]) -> String {
    docs.iter().map(write_document).collect()
}
