use std::fs;
use std::path::PathBuf;

use anaphora::corpus::{
    parse_corpus, write_corpus, AnaphorKind, CorpusError, DiscourseStatus, Document, Link, Mention, Span, Token,
};
use proptest::prelude::*;

fn fixtures(kind: &str) -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(kind);
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

#[test]
fn canonical_fixtures_survive_parse_and_write() {
    let files = fixtures("canonical");
    assert!(files.len() >= 4);
    for f in files {
        let text = fs::read_to_string(&f).unwrap();
        let docs = parse_corpus(&text).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        assert_eq!(write_corpus(&docs), text, "{}", f.display());
        assert_eq!(parse_corpus(&write_corpus(&docs)).unwrap(), docs);
        for d in &docs {
            d.validate().unwrap();
        }
    }
}

#[test]
fn hand_written_fixture_carries_every_column() {
    let text = fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/canonical/features.ua")).unwrap();
    let doc = parse_corpus(&text).unwrap().remove(0);
    let m1 = doc.mention("m1").unwrap();
    assert_eq!(m1.spans().collect::<Vec<_>>(), vec![Span::new(1, 5), Span::new(6, 8)]);
    assert_eq!(m1.anaphor_kind, Some(AnaphorKind::DiscourseDeixis));
    assert_eq!(m1.discourse_status, Some(DiscourseStatus::New));
    let m3 = doc.mention("m3").unwrap();
    assert_eq!((m3.referring, m3.anaphor_kind, m3.discourse_status), (Some(false), Some(AnaphorKind::NonReferential), None));
    assert!(!m3.is_referring());
    assert_eq!(doc.deixis, vec![Link { anaphor: "m4".into(), antecedent: "m1".into() }]);
    assert_eq!(doc.bridging, vec![Link { anaphor: "m5".into(), antecedent: "m2".into() }]);
    assert_eq!(doc.mention("m6").unwrap().span, Span::new(18, 21));
    assert_eq!(doc.tokens[6].misc.as_deref(), Some("continued"));
    let entities: Vec<Vec<String>> = doc.entity_set().clusters().map(|c| c.iter().cloned().collect()).collect();
    assert!(entities.contains(&vec!["m2".to_string(), "m6".to_string(), "m7".to_string()]));
}

#[test]
fn malformed_fixtures_raise_their_errors() {
    let expect = |name: &str, e: &CorpusError| match name {
        "bad_flag.ua" | "short_row.ua" | "index_gap.ua" => matches!(e, CorpusError::MalformedRow { .. }),
        "duplicate_attribute.ua" => matches!(e, CorpusError::DuplicateAttribute { .. }),
        "duplicate_id.ua" => matches!(e, CorpusError::DuplicateMentionId { .. }),
        "no_header.ua" => matches!(e, CorpusError::Framing { .. }),
        "self_link.ua" => matches!(e, CorpusError::InvalidLink { .. }),
        "unbalanced.ua" => matches!(e, CorpusError::UnbalancedBrackets { .. }),
        "unclosed.ua" => matches!(e, CorpusError::Framing { .. }),
        "unknown_mention.ua" => matches!(e, CorpusError::UnknownMention { .. }),
        other => panic!("no expectation for {other}"),
    };
    let files = fixtures("malformed");
    assert_eq!(files.len(), 10);
    for f in files {
        let name = f.file_name().unwrap().to_str().unwrap().to_string();
        match parse_corpus(&fs::read_to_string(&f).unwrap()) {
            Ok(_) => panic!("{name} parsed"),
            Err(e) => assert!(expect(&name, &e), "{name}: {e:?}"),
        }
    }
}

#[test]
fn span_partitions_rebuild_documents() {
    let text = fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/canonical/meetings.ua")).unwrap();
    for doc in parse_corpus(&text).unwrap() {
        let p = doc.span_partition().unwrap();
        let rebuilt = doc.with_span_partition(&p);
        assert_eq!(rebuilt.span_partition().unwrap(), p);
        rebuilt.validate().unwrap();
    }
}

const WORDS: [&str; 6] = ["the", "plan", "it", "that", ".", "works"];

/// Random documents: tokens, nested or overlapping mentions, attributes
/// and links between existing mentions.
fn document() -> impl Strategy<Value = Document> {
    (2usize..14)
        .prop_flat_map(|n| {
            let mentions = proptest::collection::vec(
                (0..n, 0..n, proptest::option::of(0u8..3), proptest::option::of(any::<bool>()), 0u8..5, proptest::option::of(0..n)),
                0..6,
            );
            let links = proptest::collection::vec((0usize..6, 0usize..6, any::<bool>()), 0..4);
            (Just(n), proptest::collection::vec((0usize..6, 0usize..2, 0usize..2), n), mentions, links)
        })
        .prop_map(|(_, toks, raw, links)| {
            let mut utterance = 0;
            let tokens: Vec<Token> = toks
                .iter()
                .enumerate()
                .map(|(i, (w, spk, bump))| {
                    utterance += bump;
                    Token {
                        index: i,
                        surface: WORDS[*w].to_string(),
                        speaker: ["A", "B"][*spk].to_string(),
                        utterance_index: utterance,
                        subtoken_count: 1,
                        misc: (*w == 1).then(|| "x=1".to_string()),
                    }
                })
                .collect();
            let mut doc = Document::new("p", tokens);
            for (k, (a, b, e, r, t, extra)) in raw.into_iter().enumerate() {
                let mut m = Mention::new(format!("m{k}"), Span::new(a.min(b), a.max(b)));
                m.gold_entity = e.map(|e| format!("e{e}"));
                m.referring = r;
                m.anaphor_kind = [None, Some(AnaphorKind::Identity), Some(AnaphorKind::DiscourseDeixis), Some(AnaphorKind::Bridging), None][t as usize];
                m.discourse_status = [None, Some(DiscourseStatus::Old), None, Some(DiscourseStatus::New), Some(DiscourseStatus::Old)][t as usize];
                if let Some(x) = extra {
                    if x > m.span.end {
                        m.extra_spans.push(Span::single(x));
                    }
                }
                doc.mentions.push(m);
            }
            let count = doc.mentions.len();
            for (a, b, bridging) in links {
                if a < count && b < count && a != b {
                    let link = Link { anaphor: format!("m{a}"), antecedent: format!("m{b}") };
                    if bridging {
                        doc.bridging.push(link);
                    } else {
                        doc.deixis.push(link);
                    }
                }
            }
            doc.normalize();
            doc
        })
}

proptest! {
    #[test]
    fn parse_inverts_write(doc in document()) {
        let text = write_corpus(std::slice::from_ref(&doc));
        let back = parse_corpus(&text).unwrap();
        prop_assert_eq!(&back, &vec![doc]);
        prop_assert_eq!(write_corpus(&back), text);
    }
}
