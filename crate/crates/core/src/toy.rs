//! Small synthetic corpora with generated embeddings, used by the test
//! suites and handy for trying the command line tool without real data.
//!
//! Documents are written in a bracket notation: `[the red button]e1`
//! marks a mention of entity `e1`, `[It]-` a non-referential mention.
//! `[paint it red]@v` names a discourse segment `v`, `[that]>v` refers to
//! it, and `[go home]+v` adds another span to `v`. `[the door]d^h` is a
//! mention of entity `d` and a bridging anaphor whose antecedent is the
//! latest earlier mention of entity `h`. In the coreference
//! corpora every token of a mention shares its entity's random base
//! vector, so the embeddings carry the gold clustering.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{write_corpus, AnaphorKind, DiscourseStatus, Document, Link, Mention, Span};
use crate::embeddings::{
    write_annotations, write_matrix, write_subtoken_map, Constituent, ConstituentType, EmbeddingManifest,
    EmbeddingStore, Matrix, SpaceEntry, TokenAnnotation,
};
use crate::lexicon;

/// Space names and widths the default clusterer configuration expects.
pub const DEFAULT_SPACES: [(&str, usize); 4] = [("bert", 768), ("numberbatch", 300), ("glove", 100), ("bert_mlm", 768)];

#[derive(Debug, Clone)]
pub struct ToyDoc {
    pub doc: Document,
    pub store: EmbeddingStore,
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

fn gaussian(seed: u64, key: &str, dim: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv(key));
    (0..dim)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            // Stored as f32 on disk; keep in-memory values identical.
            (scale * x) as f32 as f64
        })
        .collect()
}

/// Parses bracket-marked utterances into a document. Mention ids follow
/// opening order (`m0`, `m1`, ...); the label after `]` becomes the gold
/// entity, `-` marks a non-referential mention.
pub fn parse_marked(id: &str, utterances: &[(&str, &str)]) -> Document {
    let mut plain = Vec::new();
    let mut mentions = Vec::new();
    let mut stack: Vec<(usize, String)> = Vec::new();
    let mut index = 0;
    let mut next = 0;
    let mut named: BTreeMap<String, String> = BTreeMap::new();
    let mut links: Vec<(String, String)> = Vec::new();
    let mut bridges: Vec<(String, usize, String)> = Vec::new();
    for (speaker, text) in utterances {
        let mut words = Vec::new();
        for raw in text.split_whitespace() {
            let mut w = raw;
            while let Some(rest) = w.strip_prefix('[') {
                stack.push((index, format!("m{next}")));
                next += 1;
                w = rest;
            }
            let mut parts = w.split(']');
            let surface = parts.next().unwrap_or_default().to_string();
            for label in parts {
                let (start, mid) = stack.pop().expect("balanced brackets in toy text");
                let span = Span::new(start, index);
                if let Some(name) = label.strip_prefix('+') {
                    let id = &named[name];
                    let m = mentions.iter_mut().find(|m: &&mut Mention| &m.id == id).expect("named segment");
                    m.extra_spans.push(span);
                    continue;
                }
                let mut m = Mention::new(mid, span);
                if label == "-" {
                    m.anaphor_kind = Some(AnaphorKind::NonReferential);
                    m.referring = Some(false);
                } else if let Some(name) = label.strip_prefix('@') {
                    m.anaphor_kind = Some(AnaphorKind::DiscourseDeixis);
                    m.discourse_status = Some(DiscourseStatus::New);
                    named.insert(name.to_string(), m.id.clone());
                } else if let Some(name) = label.strip_prefix('>') {
                    m.anaphor_kind = Some(AnaphorKind::DiscourseDeixis);
                    m.discourse_status = Some(DiscourseStatus::Old);
                    links.push((m.id.clone(), name.to_string()));
                } else if let Some((entity, whole)) = label.split_once('^') {
                    m.gold_entity = Some(entity.to_string());
                    bridges.push((m.id.clone(), start, whole.to_string()));
                } else {
                    m.gold_entity = Some(label.to_string());
                }
                mentions.push(m);
            }
            words.push(surface);
            index += 1;
        }
        plain.push((speaker.to_string(), words.join(" ")));
    }
    assert!(stack.is_empty(), "unclosed mention in toy text");
    let refs: Vec<(&str, &str)> = plain.iter().map(|(s, t)| (s.as_str(), t.as_str())).collect();
    let mut doc = Document::from_utterances(id, &refs);
    doc.mentions = mentions;
    doc.deixis = links
        .into_iter()
        .map(|(anaphor, name)| Link { anaphor, antecedent: named[&name].clone() })
        .collect();
    doc.bridging = bridges
        .into_iter()
        .map(|(anaphor, start, whole)| {
            let antecedent = doc
                .mentions
                .iter()
                .filter(|m| m.span.start < start && m.gold_entity.as_deref() == Some(whole.as_str()))
                .max_by_key(|m| m.span)
                .expect("bridging antecedent precedes its anaphor");
            Link { anaphor, antecedent: antecedent.id.clone() }
        })
        .collect();
    doc.normalize();
    doc
}

/// Subtokens per token: words longer than six characters split in two.
pub fn subtoken_counts(doc: &Document) -> Vec<usize> {
    doc.tokens.iter().map(|t| if t.surface.chars().count() > 6 { 2 } else { 1 }).collect()
}

/// Plausible annotations: tokens of a mention attach to its last token,
/// multi-token mentions are nominal constituents (verbal for discourse
/// segments) and every sentence is a verbal one.
pub fn annotations(doc: &Document) -> Vec<TokenAnnotation> {
    let mut parent: Vec<Option<usize>> = vec![None; doc.len()];
    let mut in_mention = vec![false; doc.len()];
    let mut constituents: BTreeMap<usize, Vec<Constituent>> = BTreeMap::new();
    for m in &doc.mentions {
        for i in m.span.start..m.span.end {
            parent[i] = Some(m.span.end);
        }
        for i in m.span.start..=m.span.end {
            in_mention[i] = true;
        }
        let kind = match (m.anaphor_kind, m.discourse_status) {
            (Some(AnaphorKind::DiscourseDeixis), Some(DiscourseStatus::New)) => ConstituentType::Verbal,
            _ => ConstituentType::Nominal,
        };
        for s in m.spans().filter(|s| s.len() > 1) {
            constituents.entry(s.start).or_default().push(Constituent { end: s.end, kind });
        }
    }
    for s in doc.sentences() {
        let list = constituents.entry(s.start).or_default();
        if !list.iter().any(|c| c.end == s.end) {
            list.push(Constituent { end: s.end, kind: ConstituentType::Verbal });
        }
    }
    doc.tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (pos, dep) = if lexicon::is_sentence_final(&t.surface) || t.surface == "," {
                ("PUNCT", "punct")
            } else if lexicon::is_personal_pronoun(&t.surface) || lexicon::is_deixis_form(&t.surface) {
                ("PRON", "nsubj")
            } else if in_mention[i] {
                ("NOUN", "dobj")
            } else {
                ("VERB", "ROOT")
            };
            TokenAnnotation {
                token: i,
                pos: pos.into(),
                dep: dep.into(),
                parent: parent[i],
                lemma: Some(t.surface.to_lowercase()),
                tag: None,
                constituents: constituents.remove(&i).unwrap_or_default(),
            }
        })
        .collect()
}

/// Builds a store whose subtoken vectors are `base(key(token)) + noise`.
/// Tokens with the same key share a base vector.
pub fn synthetic_store(
    doc: &Document,
    spaces: &[(&str, usize)],
    seed: u64,
    noise: f64,
    key: impl Fn(usize) -> String,
) -> EmbeddingStore {
    let counts = subtoken_counts(doc);
    let mut ranges = Vec::new();
    let mut at = 0;
    for c in &counts {
        ranges.push(at..at + c);
        at += c;
    }
    let parts = spaces
        .iter()
        .map(|(name, dim)| {
            let mut data = Vec::with_capacity(at * dim);
            for (i, r) in ranges.iter().enumerate() {
                let base = gaussian(seed, &format!("{name}/{}", key(i)), *dim, 1.0);
                for s in r.clone() {
                    let n = gaussian(seed, &format!("{name}/noise/{}/{s}", doc.id), *dim, noise);
                    data.extend(base.iter().zip(&n).map(|(b, e)| (b + e) as f32 as f64));
                }
            }
            let fallback = gaussian(seed, &format!("{name}/vocabulary-mean"), *dim, 0.1);
            (name.to_string(), Matrix { rows: at, dim: *dim, data }, Some(fallback))
        })
        .collect();
    EmbeddingStore::from_parts(doc.id.clone(), parts, ranges, annotations(doc)).expect("consistent toy store")
}

/// Base-vector key of each token: the innermost mention's entity, a
/// shared key for non-referential mentions, else the token itself.
pub fn entity_keys(doc: &Document) -> Vec<String> {
    (0..doc.len())
        .map(|i| {
            doc.mentions
                .iter()
                .filter(|m| m.span.contains(i))
                .min_by_key(|m| m.span.len())
                .map(|m| match &m.gold_entity {
                    Some(e) => format!("entity/{e}"),
                    None => "nonref".to_string(),
                })
                .unwrap_or_else(|| format!("token/{}/{i}", doc.id))
        })
        .collect()
}

/// Two short meeting dialogues for the workspace clusterer.
pub fn wcs_corpus(spaces: &[(&str, usize)]) -> Vec<ToyDoc> {
    let docs = [
        parse_marked(
            "toy_a",
            &[
                ("A", "[I]a think [the remote]rc should be yellow ."),
                ("B", "Yes , [the remote]rc needs [a bright colour]col and [it]rc should feel soft ."),
                ("A", "[It]- is late , but [I]a like [the yellow idea]idea ."),
                ("B", "[The idea]idea works . [We]we can show [it]idea to [the manager]mgr ."),
                ("A", "[The manager]mgr will like [the remote]rc ."),
            ],
        ),
        parse_marked(
            "toy_b",
            &[
                ("C", "[The buttons]bt are too small for [my fingers]fg ."),
                ("D", "[I]d agree , [they]bt need [a bigger shape]sh ."),
                ("C", "[It]- seems that [the case]cs is heavy ."),
                ("D", "[The case]cs could use [a lighter material]mat and [the buttons]bt could be round ."),
                ("C", "[I]c like [that material]mat for [the case]cs ."),
            ],
        ),
    ];
    docs.into_iter()
        .map(|doc| {
            let keys = entity_keys(&doc);
            let store = synthetic_store(&doc, spaces, 11, 0.3, |i| keys[i].clone());
            ToyDoc { doc, store }
        })
        .collect()
}

/// Word-level keys: every occurrence of a word shares a base vector, like a
/// static embedding table.
pub fn word_keys(doc: &Document) -> Vec<String> {
    doc.tokens.iter().map(|t| format!("word/{}", t.surface.to_lowercase())).collect()
}

/// Twenty one-anaphor dialogues for the discourse-deixis resolver: eight
/// deictic `that`s (clause or sentence antecedents), six identity `it`s and
/// six expletive `it`s.
pub fn dd_corpus(spaces: &[(&str, usize)]) -> Vec<ToyDoc> {
    const COLOURS: [&str; 8] = ["red", "blue", "green", "yellow", "black", "white", "orange", "purple"];
    const ADJ: [&str; 8] = ["great", "fine", "risky", "odd", "smart", "costly", "fun", "wise"];
    const NOUNS: [&str; 6] = ["remote", "case", "button", "screen", "battery", "cover"];
    const FEEL: [&str; 6] = ["soft", "heavy", "cheap", "solid", "small", "warm"];
    const TIMES: [&str; 6] = ["late", "early", "noon", "cold", "sunny", "quiet"];
    let mut texts: Vec<(String, Vec<(&str, String)>)> = Vec::new();
    for k in 0..8 {
        let (c, a) = (COLOURS[k], ADJ[k]);
        let lines = if k % 2 == 0 {
            vec![("C", "okay let us begin .".to_string()), ("A", format!("we could [paint the case {c}]@v .")), ("B", format!("[that]>v sounds {a} ."))]
        } else {
            vec![("C", "okay let us begin .".to_string()), ("A", format!("[we should try {c} buttons .]@v")), ("B", format!("I think [that]>v is {a} ."))]
        };
        texts.push((format!("dd_{k}"), lines));
    }
    for k in 0..6 {
        let (n, f) = (NOUNS[k], FEEL[k]);
        texts.push((
            format!("id_{k}"),
            vec![("C", "okay let us begin .".to_string()), ("A", format!("[the {n}]e is here .")), ("B", format!("yes [it]e feels {f} ."))],
        ));
    }
    for k in 0..6 {
        let (n, t) = (NOUNS[k], TIMES[k]);
        texts.push((
            format!("nr_{k}"),
            vec![("C", "okay let us begin .".to_string()), ("A", format!("we need [a {n}]e .")), ("B", format!("well [it]- is {t} now ."))],
        ));
    }
    texts
        .into_iter()
        .map(|(id, lines)| {
            let refs: Vec<(&str, &str)> = lines.iter().map(|(s, t)| (*s, t.as_str())).collect();
            let doc = parse_marked(&id, &refs);
            let keys = word_keys(&doc);
            let store = synthetic_store(&doc, spaces, 23, 0.3, |i| keys[i].clone());
            ToyDoc { doc, store }
        })
        .collect()
}

/// Six meeting snippets with five bridging anaphors each. Every part
/// (`the door`) shares its latent base vector with the whole it belongs to
/// (`the house`); wholes are introduced first and parts follow in a
/// shuffled order, so the nearest candidate is rarely the answer.
pub fn bridging_corpus(spaces: &[(&str, usize)]) -> Vec<ToyDoc> {
    const PAIRS: [(&str, &str); 10] = [
        ("house", "door"),
        ("car", "wheel"),
        ("book", "cover"),
        ("tree", "branch"),
        ("phone", "screen"),
        ("shirt", "sleeve"),
        ("table", "leg"),
        ("remote", "button"),
        ("laptop", "keyboard"),
        ("bottle", "label"),
    ];
    const ORDERS: [[usize; 5]; 6] = [[2, 0, 4, 1, 3], [4, 3, 1, 0, 2], [1, 4, 2, 3, 0], [3, 1, 0, 4, 2], [0, 2, 3, 1, 4], [2, 4, 0, 3, 1]];
    ORDERS
        .iter()
        .enumerate()
        .map(|(j, order)| {
            let pairs: Vec<(&str, &str)> = (0..5).map(|k| PAIRS[(2 * j + k) % PAIRS.len()]).collect();
            let mut lines: Vec<(&str, String)> = pairs
                .iter()
                .enumerate()
                .map(|(k, (whole, _))| ("A", format!("look at [the {whole}]w{k} here .")))
                .collect();
            lines.extend(order.iter().map(|&k| ("B", format!("well [the {}]p{k}^w{k} seems fine .", pairs[k].1))));
            let refs: Vec<(&str, &str)> = lines.iter().map(|(s, t)| (*s, t.as_str())).collect();
            let doc = parse_marked(&format!("br_{j}"), &refs);
            let words = word_keys(&doc);
            let keys: Vec<String> = (0..doc.len())
                .map(|i| {
                    match doc.mentions.iter().find(|m| m.span.contains(i)).and_then(|m| m.gold_entity.as_deref()) {
                        Some(e) => format!("latent/{}/{}", doc.id, &e[1..]),
                        None => words[i].clone(),
                    }
                })
                .collect();
            let store = synthetic_store(&doc, spaces, 31, 0.3, |i| keys[i].clone());
            ToyDoc { doc, store }
        })
        .collect()
}

/// Paths of a bundle written by [`write_bundle`].
#[derive(Debug, Clone)]
pub struct Bundle {
    pub corpus: PathBuf,
    /// Directory holding one manifest per document.
    pub manifests: PathBuf,
}

/// Writes the documents as one corpus file plus an embedding manifest,
/// matrices, annotations and subtoken map per document.
pub fn write_bundle(dir: &Path, name: &str, docs: &[ToyDoc]) -> io::Result<Bundle> {
    let emb = dir.join(format!("{name}-emb"));
    fs::create_dir_all(&emb)?;
    let corpus = dir.join(format!("{name}.ua"));
    let plain: Vec<Document> = docs.iter().map(|d| d.doc.clone()).collect();
    fs::write(&corpus, write_corpus(&plain))?;
    let to_io = |e: crate::embeddings::EmbeddingError| io::Error::new(io::ErrorKind::Other, e.to_string());
    for d in docs {
        let id = &d.doc.id;
        let data = emb.join(id);
        fs::create_dir_all(&data)?;
        let store = &d.store;
        let mut spaces = Vec::new();
        for space in store.space_names() {
            let dim = store.dim(space).map_err(to_io)?;
            let rows: Vec<Vec<f32>> = (0..store.subtoken_total())
                .map(|s| store.subtoken_vector(space, s).map(|v| v.iter().map(|x| *x as f32).collect()))
                .collect::<Result<_, _>>()
                .map_err(to_io)?;
            write_matrix(&data.join(format!("{space}.bin")), dim, &rows).map_err(to_io)?;
            let fallback_path = match store.fallback_vector(space) {
                Ok(f) => {
                    let row: Vec<f32> = f.iter().map(|x| *x as f32).collect();
                    write_matrix(&data.join(format!("{space}.mean.bin")), dim, &[row]).map_err(to_io)?;
                    Some(PathBuf::from(id).join(format!("{space}.mean.bin")))
                }
                Err(_) => None,
            };
            spaces.push(SpaceEntry {
                name: space.to_string(),
                dim,
                path: PathBuf::from(id).join(format!("{space}.bin")),
                fallback_path,
            });
        }
        let counts: Vec<usize> = (0..store.token_count()).map(|t| store.subtokens_of(t).len()).collect();
        write_subtoken_map(&data.join("subtokens.tsv"), &counts).map_err(to_io)?;
        write_annotations(&data.join("annotations.jsonl"), store.annotations()).map_err(to_io)?;
        let manifest = EmbeddingManifest {
            doc_id: id.clone(),
            spaces,
            annotation_path: PathBuf::from(id).join("annotations.jsonl"),
            subtoken_map_path: PathBuf::from(id).join("subtokens.tsv"),
            provenance: Some(serde_json::json!({"generator": "toy", "seed": 11})),
        };
        manifest.save(&emb.join(format!("{id}.json"))).map_err(to_io)?;
    }
    Ok(Bundle { corpus, manifests: emb })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marked_text() {
        let d = parse_marked("d", &[("A", "[the [red]c button]b is [It]- ok")]);
        assert_eq!(d.tokens.len(), 6);
        let spans: Vec<_> = d.mentions.iter().map(|m| (m.span, m.gold_entity.clone())).collect();
        assert_eq!(
            spans,
            vec![
                (Span::new(0, 2), Some("b".into())),
                (Span::new(1, 1), Some("c".into())),
                (Span::new(4, 4), None),
            ]
        );
        assert!(!d.mentions[2].is_referring());
    }

    #[test]
    fn bundle_reloads_identically() {
        let docs = wcs_corpus(&[("bert", 8), ("glove", 4)]);
        let dir = tempfile::tempdir().unwrap();
        let b = write_bundle(dir.path(), "toy", &docs).unwrap();
        let parsed = crate::corpus::parse_corpus(&fs::read_to_string(&b.corpus).unwrap()).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0], docs[0].doc);
        let set = crate::embeddings::StoreSet::load(&[b.manifests]).unwrap();
        let s = set.get("toy_b").unwrap();
        assert_eq!(s.span_vector("bert", Span::new(0, 1)).unwrap(), docs[1].store.span_vector("bert", Span::new(0, 1)).unwrap());
        assert_eq!(s.annotations(), docs[1].store.annotations());
    }
}
