//! Precomputed, subtoken-aligned embeddings and per-token annotations.
//!
//! A JSON manifest names one or more embedding spaces for a single
//! document. Each space is a binary matrix:
//!
//! ```text
//! magic   8 bytes   "ANAEMB01"
//! rows    u64 LE
//! dim     u64 LE
//! data    rows * dim f32 LE, row-major, one row per subtoken
//! ```
//!
//! The subtoken map is a text file with one `token<TAB>first<TAB>count`
//! line per token; annotations are JSON lines, one record per token.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Span};

pub const MATRIX_MAGIC: &[u8; 8] = b"ANAEMB01";

/// Universal POS tags (plus spaCy's SPACE).
pub const POS_TAGS: &[&str] = &[
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X", "SPACE",
];

/// English dependency labels as produced by spaCy (ClearNLP style).
pub const DEP_TAGS: &[&str] = &[
    "ROOT", "acl", "acomp", "advcl", "advmod", "agent", "amod", "appos", "attr", "aux", "auxpass",
    "case", "cc", "ccomp", "compound", "conj", "csubj", "csubjpass", "dative", "dep", "det",
    "dobj", "expl", "intj", "mark", "meta", "neg", "nmod", "npadvmod", "nsubj", "nsubjpass",
    "nummod", "oprd", "parataxis", "pcomp", "pobj", "poss", "preconj", "predet", "prep", "prt",
    "punct", "quantmod", "relcl", "xcomp",
];

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: not an embedding matrix")]
    BadMagic { path: PathBuf },
    #[error("space `{space}`: declared dim {declared}, matrix has {found}")]
    DimMismatch { space: String, declared: usize, found: usize },
    #[error("space `{space}`: matrix file {path} is missing")]
    MissingSpace { space: String, path: PathBuf },
    #[error("space `{space}`: matrix has {rows} rows, {needed} required")]
    TruncatedMatrix { space: String, rows: usize, needed: usize },
    #[error("unknown embedding space `{0}`")]
    UnknownSpace(String),
    #[error("space `{0}` declares no fallback vector")]
    NoFallbackDeclared(String),
    #[error("duplicate space name `{0}`")]
    DuplicateSpace(String),
    #[error("subtoken map line {line}: {reason}")]
    BadSubtokenMap { line: usize, reason: String },
    #[error("annotation line {line}: {reason}")]
    BadAnnotation { line: usize, reason: String },
    #[error("document `{doc}`: {reason}")]
    DocumentMismatch { doc: String, reason: String },
    #[error("span {span} outside the {len}-token document")]
    SpanOutOfRange { span: Span, len: usize },
}

type Result<T, E = EmbeddingError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceEntry {
    pub name: String,
    pub dim: usize,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingManifest {
    pub doc_id: String,
    pub spaces: Vec<SpaceEntry>,
    pub annotation_path: PathBuf,
    pub subtoken_map_path: PathBuf,
    /// Free-form exporter metadata (model versions and the like).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl EmbeddingManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|source| EmbeddingError::Io { path: path.into(), source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstituentType {
    Verbal,
    Nominal,
    Other,
}

impl ConstituentType {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constituent {
    pub end: usize,
    #[serde(rename = "type")]
    pub kind: ConstituentType,
}

/// One JSON line of the annotation file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAnnotation {
    pub token: usize,
    pub pos: String,
    pub dep: String,
    pub parent: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
    /// Fine-grained (Penn) tag, used for number agreement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    /// Constituents starting at this token.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constituents: Vec<Constituent>,
}

impl TokenAnnotation {
    pub fn pos_index(&self) -> usize {
        POS_TAGS.iter().position(|t| *t == self.pos).expect("validated on load")
    }

    pub fn dep_index(&self) -> usize {
        DEP_TAGS.iter().position(|t| *t == self.dep).expect("validated on load")
    }

    pub fn is_plural_noun(&self) -> bool {
        matches!(self.tag.as_deref(), Some("NNS" | "NNPS"))
    }
}

/// A dense f64 matrix read from the binary interchange format.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbeddingError + '_ {
    move |source| EmbeddingError::Io { path: path.into(), source }
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 24 || &bytes[..8] != MATRIX_MAGIC {
        return Err(EmbeddingError::BadMagic { path: path.into() });
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let dim = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let body = &bytes[24..];
    let available = body.len() / 4 / dim.max(1);
    let data = body
        .chunks_exact(4)
        .take(available.min(rows) * dim)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Matrix { rows: available.min(rows), dim, data })
}

pub fn write_matrix(path: &Path, dim: usize, rows: &[Vec<f32>]) -> Result<()> {
    let mut bytes = Vec::with_capacity(24 + rows.len() * dim * 4);
    bytes.extend_from_slice(MATRIX_MAGIC);
    bytes.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&(dim as u64).to_le_bytes());
    for row in rows {
        assert_eq!(row.len(), dim, "row width");
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Reads `token first count` lines; tokens must be listed in order and
/// subtokens must tile `0..total` without gaps.
pub fn read_subtoken_map(path: &Path) -> Result<Vec<Range<usize>>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    let mut next = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| EmbeddingError::BadSubtokenMap { line: n + 1, reason: reason.into() };
        let fields: Vec<usize> = line
            .split('\t')
            .map(|f| f.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("expected three integers"))?;
        let [token, first, count] = fields[..] else {
            return Err(bad("expected three fields"));
        };
        if token != out.len() {
            return Err(bad("tokens out of order"));
        }
        if first != next || count == 0 {
            return Err(bad("subtokens must be contiguous and non-empty"));
        }
        out.push(first..first + count);
        next = first + count;
    }
    Ok(out)
}

pub fn write_subtoken_map(path: &Path, counts: &[usize]) -> Result<()> {
    let mut text = String::new();
    let mut first = 0;
    for (i, c) in counts.iter().enumerate() {
        text.push_str(&format!("{i}\t{first}\t{c}\n"));
        first += c;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_annotations(path: &Path) -> Result<Vec<TokenAnnotation>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out: Vec<TokenAnnotation> = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| EmbeddingError::BadAnnotation { line: n + 1, reason };
        let rec: TokenAnnotation = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if rec.token != out.len() {
            return Err(bad(format!("record for token {} out of order", rec.token)));
        }
        if !POS_TAGS.contains(&rec.pos.as_str()) {
            return Err(bad(format!("POS tag `{}` not in inventory", rec.pos)));
        }
        if !DEP_TAGS.contains(&rec.dep.as_str()) {
            return Err(bad(format!("dependency label `{}` not in inventory", rec.dep)));
        }
        out.push(rec);
    }
    for (n, rec) in out.iter().enumerate() {
        let bad = |reason: String| EmbeddingError::BadAnnotation { line: n + 1, reason };
        if rec.parent.is_some_and(|p| p >= out.len()) {
            return Err(bad(format!("parent {:?} out of range", rec.parent)));
        }
        if rec.constituents.iter().any(|c| c.end < rec.token || c.end >= out.len()) {
            return Err(bad("constituent end out of range".into()));
        }
    }
    Ok(out)
}

pub fn write_annotations(path: &Path, records: &[TokenAnnotation]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    for rec in records {
        let line = serde_json::to_string(rec).expect("annotation serializes");
        writeln!(file, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Space {
    matrix: Matrix,
    fallback: Option<Vec<f64>>,
}

/// Immutable lookup structure for one document.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    doc_id: String,
    spaces: BTreeMap<String, Space>,
    subtokens: Vec<Range<usize>>,
    annotations: Vec<TokenAnnotation>,
}

impl EmbeddingStore {
    pub fn load_manifest(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let manifest: EmbeddingManifest = serde_json::from_str(&text)
            .map_err(|source| EmbeddingError::Json { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_manifest(&manifest, base)
    }

    /// Loads `manifest`, resolving relative paths against `base`.
    pub fn from_manifest(manifest: &EmbeddingManifest, base: &Path) -> Result<Self> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let subtokens = read_subtoken_map(&resolve(&manifest.subtoken_map_path))?;
        let annotations = read_annotations(&resolve(&manifest.annotation_path))?;
        let mut spaces = BTreeMap::new();
        for entry in &manifest.spaces {
            let path = resolve(&entry.path);
            if !path.exists() {
                return Err(EmbeddingError::MissingSpace { space: entry.name.clone(), path });
            }
            let matrix = read_matrix(&path)?;
            let fallback = match &entry.fallback_path {
                Some(p) => {
                    let m = read_matrix(&resolve(p))?;
                    if m.dim != entry.dim || m.rows < 1 {
                        return Err(EmbeddingError::DimMismatch {
                            space: entry.name.clone(),
                            declared: entry.dim,
                            found: m.dim,
                        });
                    }
                    Some(m.row(0).to_vec())
                }
                None => None,
            };
            let space = Space { matrix, fallback };
            if spaces.insert(entry.name.clone(), space).is_some() {
                return Err(EmbeddingError::DuplicateSpace(entry.name.clone()));
            }
        }
        for entry in &manifest.spaces {
            let m = &spaces[&entry.name].matrix;
            if m.dim != entry.dim {
                return Err(EmbeddingError::DimMismatch {
                    space: entry.name.clone(),
                    declared: entry.dim,
                    found: m.dim,
                });
            }
        }
        Self::from_parts(
            manifest.doc_id.clone(),
            spaces.into_iter().map(|(k, s)| (k, s.matrix, s.fallback)).collect(),
            subtokens,
            annotations,
        )
    }

    /// Assembles a store from in-memory parts, applying the same checks as
    /// the file loader.
    pub fn from_parts(
        doc_id: String,
        spaces: Vec<(String, Matrix, Option<Vec<f64>>)>,
        subtokens: Vec<Range<usize>>,
        annotations: Vec<TokenAnnotation>,
    ) -> Result<Self> {
        let needed = subtokens.last().map_or(0, |r| r.end);
        if annotations.len() != subtokens.len() {
            return Err(EmbeddingError::DocumentMismatch {
                doc: doc_id,
                reason: format!(
                    "{} annotation records for {} tokens",
                    annotations.len(),
                    subtokens.len()
                ),
            });
        }
        let mut map = BTreeMap::new();
        for (name, matrix, fallback) in spaces {
            if matrix.rows < needed {
                return Err(EmbeddingError::TruncatedMatrix { space: name, rows: matrix.rows, needed });
            }
            if map.insert(name.clone(), Space { matrix, fallback }).is_some() {
                return Err(EmbeddingError::DuplicateSpace(name));
            }
        }
        Ok(EmbeddingStore { doc_id, spaces: map, subtokens, annotations })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn space_names(&self) -> impl Iterator<Item = &str> {
        self.spaces.keys().map(String::as_str)
    }

    fn space(&self, name: &str) -> Result<&Space> {
        self.spaces.get(name).ok_or_else(|| EmbeddingError::UnknownSpace(name.to_string()))
    }

    /// (subtoken rows, dim) of a space.
    pub fn shape(&self, space: &str) -> Result<(usize, usize)> {
        let m = &self.space(space)?.matrix;
        Ok((m.rows, m.dim))
    }

    pub fn dim(&self, space: &str) -> Result<usize> {
        Ok(self.space(space)?.matrix.dim)
    }

    pub fn token_count(&self) -> usize {
        self.subtokens.len()
    }

    pub fn subtoken_total(&self) -> usize {
        self.subtokens.last().map_or(0, |r| r.end)
    }

    pub fn subtokens_of(&self, token: usize) -> Range<usize> {
        self.subtokens[token].clone()
    }

    pub fn subtoken_vector(&self, space: &str, subtoken: usize) -> Result<&[f64]> {
        Ok(self.space(space)?.matrix.row(subtoken))
    }

    pub fn annotations(&self) -> &[TokenAnnotation] {
        &self.annotations
    }

    pub fn annotation(&self, token: usize) -> &TokenAnnotation {
        &self.annotations[token]
    }

    fn check_span(&self, span: Span) -> Result<()> {
        if span.start > span.end || span.end >= self.subtokens.len() {
            return Err(EmbeddingError::SpanOutOfRange { span, len: self.subtokens.len() });
        }
        Ok(())
    }

    /// Mean of every subtoken vector covered by `span`.
    pub fn span_vector(&self, space: &str, span: Span) -> Result<Vec<f64>> {
        let m = &self.space(space)?.matrix;
        self.check_span(span)?;
        let rows = self.subtokens[span.start].start..self.subtokens[span.end].end;
        let mut out = vec![0.0; m.dim];
        for r in rows.clone() {
            for (o, v) in out.iter_mut().zip(m.row(r)) {
                *o += v;
            }
        }
        let n = rows.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        Ok(out)
    }

    pub fn token_vector(&self, space: &str, token: usize) -> Result<Vec<f64>> {
        self.span_vector(space, Span::single(token))
    }

    /// The vocabulary-mean vector declared for `space`.
    pub fn fallback_vector(&self, space: &str) -> Result<&[f64]> {
        self.space(space)?
            .fallback
            .as_deref()
            .ok_or_else(|| EmbeddingError::NoFallbackDeclared(space.to_string()))
    }

    /// Span vector, replaced by the fallback when every covered row is zero
    /// (the exporter's marker for out-of-vocabulary words).
    pub fn span_vector_or_fallback(&self, space: &str, span: Span) -> Result<Vec<f64>> {
        let v = self.span_vector(space, span)?;
        if v.iter().all(|x| *x == 0.0) {
            if let Ok(f) = self.fallback_vector(space) {
                return Ok(f.to_vec());
            }
        }
        Ok(v)
    }

    /// Syntactic head of a span: the leftmost token whose parent lies
    /// outside the span (or is absent). Falls back to the leftmost token.
    pub fn head_token(&self, span: Span) -> usize {
        (span.start..=span.end)
            .find(|&i| match self.annotations[i].parent {
                None => true,
                Some(p) => !span.contains(p),
            })
            .unwrap_or(span.start)
    }

    pub fn head_vector(&self, space: &str, span: Span) -> Result<Vec<f64>> {
        self.space(space)?;
        self.check_span(span)?;
        self.token_vector(space, self.head_token(span))
    }

    /// Constituent label for `span`, `Other` if none is annotated.
    pub fn constituent_type(&self, span: Span) -> ConstituentType {
        self.annotations
            .get(span.start)
            .and_then(|a| a.constituents.iter().find(|c| c.end == span.end))
            .map_or(ConstituentType::Other, |c| c.kind)
    }

    /// Verifies that this store describes `doc`.
    pub fn check_document(&self, doc: &Document) -> Result<()> {
        let mismatch = |reason: String| EmbeddingError::DocumentMismatch { doc: doc.id.clone(), reason };
        if doc.id != self.doc_id {
            return Err(mismatch(format!("store is for `{}`", self.doc_id)));
        }
        if doc.tokens.len() != self.subtokens.len() {
            return Err(mismatch(format!(
                "{} tokens, subtoken map covers {}",
                doc.tokens.len(),
                self.subtokens.len()
            )));
        }
        Ok(())
    }

    /// Copies subtoken counts into the document's tokens.
    pub fn apply_subtoken_counts(&self, doc: &mut Document) -> Result<()> {
        self.check_document(doc)?;
        for (tok, r) in doc.tokens.iter_mut().zip(&self.subtokens) {
            tok.subtoken_count = r.len();
        }
        Ok(())
    }
}

/// Stores for a corpus, keyed by document id.
#[derive(Debug, Clone, Default)]
pub struct StoreSet {
    stores: BTreeMap<String, EmbeddingStore>,
}

impl StoreSet {
    pub fn new(stores: impl IntoIterator<Item = EmbeddingStore>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for s in stores {
            let id = s.doc_id.clone();
            if map.insert(id.clone(), s).is_some() {
                return Err(EmbeddingError::DocumentMismatch { doc: id, reason: "two manifests".into() });
            }
        }
        Ok(StoreSet { stores: map })
    }

    /// Loads manifest files; directories contribute every `*.json` inside.
    pub fn load(paths: &[PathBuf]) -> Result<Self> {
        let mut files = BTreeSet::new();
        for p in paths {
            if p.is_dir() {
                for entry in fs::read_dir(p).map_err(io_err(p))? {
                    let path = entry.map_err(io_err(p))?.path();
                    if path.extension().is_some_and(|e| e == "json") {
                        files.insert(path);
                    }
                }
            } else {
                files.insert(p.clone());
            }
        }
        let stores = files
            .iter()
            .map(|f| EmbeddingStore::load_manifest(f))
            .collect::<Result<Vec<_>>>()?;
        Self::new(stores)
    }

    pub fn get(&self, doc_id: &str) -> Result<&EmbeddingStore> {
        self.stores.get(doc_id).ok_or_else(|| EmbeddingError::DocumentMismatch {
            doc: doc_id.to_string(),
            reason: "no embedding manifest".into(),
        })
    }

    pub fn len(&self) -> usize {
        self.stores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stores.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn annotation(token: usize, parent: Option<usize>) -> TokenAnnotation {
        TokenAnnotation {
            token,
            pos: "NOUN".into(),
            dep: "dep".into(),
            parent,
            lemma: None,
            tag: None,
            constituents: Vec::new(),
        }
    }

    fn store(rows: Vec<Vec<f64>>, counts: &[usize], parents: &[Option<usize>]) -> EmbeddingStore {
        let dim = rows[0].len();
        let mut subtokens = Vec::new();
        let mut first = 0;
        for c in counts {
            subtokens.push(first..first + c);
            first += c;
        }
        let matrix = Matrix { rows: rows.len(), dim, data: rows.concat() };
        let anns = parents.iter().enumerate().map(|(i, p)| annotation(i, *p)).collect();
        EmbeddingStore::from_parts("d".into(), vec![("s".into(), matrix, None)], subtokens, anns)
            .unwrap()
    }

    #[test]
    fn mean_over_subtokens() {
        let s = store(vec![vec![1.0, 0.0], vec![0.0, 2.0]], &[2], &[None]);
        assert_eq!(s.span_vector("s", Span::single(0)).unwrap(), vec![0.5, 1.0]);
    }

    #[test]
    fn single_subtoken_is_identity() {
        let s = store(vec![vec![3.0, -1.0], vec![0.0, 2.0]], &[1, 1], &[None, None]);
        assert_eq!(s.span_vector("s", Span::single(0)).unwrap(), vec![3.0, -1.0]);
        assert!(matches!(s.span_vector("nope", Span::single(0)), Err(EmbeddingError::UnknownSpace(_))));
        assert!(matches!(s.fallback_vector("s"), Err(EmbeddingError::NoFallbackDeclared(_))));
    }

    #[test]
    fn head_of_the_red_button() {
        // the -> button, red -> button, button -> (root)
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let s = store(rows, &[1, 1, 1], &[Some(2), Some(2), None]);
        assert_eq!(s.head_token(Span::new(0, 2)), 2);
        assert_eq!(s.head_vector("s", Span::new(0, 2)).unwrap(), vec![3.0]);
        assert_eq!(s.head_vector("s", Span::single(1)).unwrap(), vec![2.0]);
    }

    #[test]
    fn cyclic_parents_fall_back_to_leftmost() {
        let s = store(vec![vec![1.0], vec![2.0]], &[1, 1], &[Some(1), Some(0)]);
        assert_eq!(s.head_token(Span::new(0, 1)), 0);
    }

    #[test]
    fn truncated_matrix_is_rejected() {
        let matrix = Matrix { rows: 2, dim: 1, data: vec![0.0, 1.0] };
        let err = EmbeddingStore::from_parts(
            "d".into(),
            vec![("s".into(), matrix, None)],
            vec![0..3],
            vec![annotation(0, None)],
        )
        .unwrap_err();
        assert!(matches!(err, EmbeddingError::TruncatedMatrix { rows: 2, needed: 3, .. }));
    }

    #[test]
    fn oov_rows_use_fallback() {
        let matrix = Matrix { rows: 2, dim: 2, data: vec![0.0, 0.0, 1.0, 1.0] };
        let s = EmbeddingStore::from_parts(
            "d".into(),
            vec![("s".into(), matrix, Some(vec![0.1, 0.2]))],
            vec![0..1, 1..2],
            vec![annotation(0, None), annotation(1, None)],
        )
        .unwrap();
        assert_eq!(s.fallback_vector("s").unwrap(), &[0.1, 0.2]);
        assert_eq!(s.span_vector_or_fallback("s", Span::single(0)).unwrap(), vec![0.1, 0.2]);
        assert_eq!(s.span_vector_or_fallback("s", Span::single(1)).unwrap(), vec![1.0, 1.0]);
    }
}
