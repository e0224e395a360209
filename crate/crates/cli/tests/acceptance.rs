//! Runs every acceptance criterion and prints one PASS/FAIL line each.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use anaphora::bridging::{self, BridgingConfig, BridgingModel};
use anaphora::combiner::merge_singletons;
use anaphora::corpus::{parse_corpus, write_corpus, CorpusError, Document};
use anaphora::dd::{self, choose_antecedent, undersample, AnaphorClass, DdConfig, DdModel, DdStats};
use anaphora::metrics::{b_cubed, ceaf_e, conll_f1, muc, CorefAccumulator};
use anaphora::nn::Params;
use anaphora::toy::{self, ToyDoc, DEFAULT_SPACES};
use anaphora::wcs::{self, EncoderInput, EncoderSpec, WcsConfig, WcsModel};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures(kind: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(kind);
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let (k, r) = (random_clusters(&mut rng, n), random_clusters(&mut rng, n));
        let (pk, pr) = (partition(&k), partition(&r));
        for (got, want) in [
            (muc(&pk, &pr), muc_oracle(&k, &r)),
            (b_cubed(&pk, &pr), b3_oracle(&k, &r)),
            (ceaf_e(&pk, &pr), ceaf_e_oracle(&k, &r)),
        ] {
            for (a, b) in [(got.recall, want.0), (got.precision, want.1), (got.f1, want.2)] {
                worst = worst.max((a - b).abs());
            }
        }
        worst = worst.max((conll_f1(&pk, &pr, true) - conll_oracle(&k, &r)).abs() / 100.0);
        let id = conll_f1(&pk, &pk, true);
        if !pk.is_empty() {
            ensure(format!("{id:.2}") == "100.00", || format!("identity scored {id} on {k:?}"))?;
        }
    }
    ensure(worst < 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("1000 random pairs, max error {worst:.1e}"))
}

fn singleton_merge() -> Outcome {
    let parts: Vec<_> = all_partial_partitions(5).iter().map(partition).collect();
    for base in &parts {
        let taken = base.mentions();
        let base_sets: BTreeSet<_> = base.clusters().cloned().collect();
        for source in &parts {
            let got: BTreeSet<_> = merge_singletons(base, source).clusters().cloned().collect();
            let expected: BTreeSet<_> = base_sets
                .iter()
                .cloned()
                .chain(source.clusters().filter(|c| c.len() == 1 && c.iter().all(|m| !taken.contains(m))).cloned())
                .collect();
            ensure(got == expected, || format!("base {base:?} source {source:?}"))?;
        }
    }
    Ok(format!("{} partition pairs", parts.len() * parts.len()))
}

fn fd_summary(name: &str, report: &FdReport, all: &Params) -> Result<String, String> {
    ensure(report.failures.is_empty(), || format!("{name}: {}", report.failures.join("; ")))?;
    let names: BTreeSet<String> = all.tensors().iter().map(|t| t.name.clone()).collect();
    let missing: Vec<&String> = names.difference(&report.covered).collect();
    ensure(missing.is_empty(), || format!("{name}: unchecked tensors {missing:?}"))?;
    Ok(format!(
        "{name} {} entries over {} tensors ({} at ReLU kinks skipped or rechecked at h=1e-5), worst {:.1e}",
        report.checked,
        names.len(),
        report.kinks,
        report.worst
    ))
}

fn gradient_checks() -> Outcome {
    let spaces = [("bert", 6), ("glove", 4)];
    let wcs_docs = toy::wcs_corpus(&spaces);
    let dd_docs = toy::dd_corpus(&[("spanbert", 4)]);
    let br_docs = toy::bridging_corpus(&[("bert", 3)]);
    let (mut w, mut d, mut b) = (FdReport::default(), FdReport::default(), FdReport::default());
    let (mut wp, mut dp, mut bp) = (None, None, None);
    for seed in 0..10u64 {
        let config = WcsConfig {
            encoders: vec![
                EncoderSpec::new("bert", EncoderInput::Head, 6, 5, 4),
                EncoderSpec::new("glove", EncoderInput::Span, 4, 5, 3),
            ],
            feature_dim: 3,
            scorer_hidden: 5,
            max_speakers: 3,
            seed,
            ..WcsConfig::default()
        };
        let mut model = WcsModel::new(config);
        jitter_biases(&mut model.params, seed);
        let doc = &wcs_docs[seed as usize % 2];
        let inputs = model.prepare(&doc.doc, &doc.store).unwrap();
        let (_, grads) = model.gradient_loss(&inputs);
        let loss = |p: &Params| {
            let mut m = model.clone();
            m.params = p.clone();
            m.gradient_loss(&inputs).0
        };
        w.merge(check_gradients(&model.params, &grads, loss, 4, seed));
        wp = Some(model.params.clone());

        let config = DdConfig { dim: 4, feature_dim: 2, pair_dim: 3, hidden: 5, type_hidden: 4, seed, ..DdConfig::default() };
        let mut model = DdModel::new(config);
        jitter_biases(&mut model.params, seed);
        let inputs: Vec<_> = dd_docs.iter().flat_map(|t| dd::prepare_document(&t.doc, &t.store, &model.config).unwrap()).collect();
        for x in [&inputs[seed as usize % 8], &inputs[8 + seed as usize % 6], &inputs[14 + seed as usize % 6]] {
            let (_, grads) = model.loss_and_grads(x).unwrap();
            let loss = |p: &Params| {
                let mut m = model.clone();
                m.params = p.clone();
                m.loss(x).unwrap().total
            };
            d.merge(check_gradients(&model.params, &grads, loss, 4, seed));
        }
        dp = Some(model.params.clone());

        let config = BridgingConfig { dim: 3, feature_dim: 2, hidden: 4, seed, ..BridgingConfig::default() };
        let mut model = BridgingModel::new(config);
        jitter_biases(&mut model.params, seed);
        let inputs: Vec<_> = br_docs.iter().flat_map(|t| bridging::prepare_document(&t.doc, &t.store, &model.config).unwrap().0).collect();
        for x in [&inputs[seed as usize % 30], &inputs[(seed as usize * 7 + 3) % 30]] {
            let (_, grads) = model.loss_and_grads(x).unwrap();
            let loss = |p: &Params| {
                let mut m = model.clone();
                m.params = p.clone();
                m.loss(x).unwrap()
            };
            b.merge(check_gradients(&model.params, &grads, loss, 4, seed));
        }
        bp = Some(model.params.clone());
    }
    let parts = [
        fd_summary("wcs", &w, wp.as_ref().unwrap())?,
        fd_summary("dd", &d, dp.as_ref().unwrap())?,
        fd_summary("bridging", &b, bp.as_ref().unwrap())?,
    ];
    Ok(format!("10 seeds; {}", parts.join("; ")))
}

fn wcs_overfit() -> Outcome {
    let docs = toy::wcs_corpus(&DEFAULT_SPACES);
    let pairs: Vec<(&Document, &anaphora::embeddings::EmbeddingStore)> = docs.iter().map(|d| (&d.doc, &d.store)).collect();
    let config = WcsConfig::default();
    ensure(config.epochs == 5 && config.lr == 1e-4, || "defaults changed".into())?;
    let (model, log) = wcs::train_wcs(&pairs, config).map_err(|e| e.to_string())?;
    let inputs: Vec<_> = docs.iter().map(|d| model.prepare(&d.doc, &d.store).unwrap()).collect();
    let initial = log.total(0);
    let last = *wcs::evaluate(&model, &inputs).last().unwrap();
    ensure(last < 0.2 * initial, || format!("loss {initial:.4} -> {last:.4}"))?;
    let mut acc = CorefAccumulator::default();
    for d in &docs {
        let pred = model.predict_document(&d.doc, &d.store).map_err(|e| e.to_string())?;
        let gold = d.doc.entity_set();
        ensure(pred.partition == gold, || format!("{}: {:?} vs {:?}", d.doc.id, pred.partition, gold))?;
        acc.add(&gold, &pred.partition, true);
    }
    let f1 = acc.scores().conll;
    ensure((f1 - 100.0).abs() < 1e-9, || format!("CoNLL F1 {f1}"))?;
    Ok(format!("loss {initial:.4} -> {last:.4} ({:.3}x), CoNLL F1 {f1:.2}", last / initial))
}

fn dd_pipeline() -> Outcome {
    // Segments on every fixture, toy corpus and a long random history.
    let mut docs: Vec<Document> = Vec::new();
    for f in fixtures("canonical") {
        docs.extend(parse_corpus(&fs::read_to_string(f).unwrap()).unwrap());
    }
    for t in toy::dd_corpus(&[("spanbert", 4)]).into_iter().chain(toy::wcs_corpus(&[("bert", 4)])) {
        let mut doc = t.doc.clone();
        t.store.apply_subtoken_counts(&mut doc).unwrap();
        docs.push(doc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let words = ["we", "discussed", "interface", "that", "it", "remote", "this", "controls", "ok", "which"];
    let texts: Vec<String> = (0..200)
        .map(|_| {
            let mut w: Vec<&str> = (0..rng.gen_range(1..30)).map(|_| words[rng.gen_range(0..words.len())]).collect();
            w.push(".");
            w.join(" ")
        })
        .collect();
    let refs: Vec<(&str, &str)> = texts.iter().map(|t| ("A", t.as_str())).collect();
    let mut long = Document::from_utterances("long", &refs);
    let counts = toy::subtoken_counts(&long);
    long.tokens.iter_mut().zip(counts).for_each(|(t, c)| t.subtoken_count = c);
    docs.push(long);
    let mut segments = 0;
    for d in &docs {
        segments += check_segments(d, 256)?;
    }

    let classes: Vec<AnaphorClass> = class_mix_corpus(4324, 4049, 1454)
        .iter()
        .flat_map(|d| dd::labeled_segments(d, 256))
        .map(|s| s.class)
        .collect();
    let balanced = undersample(&classes, |c| *c, 0);
    let sizes: Vec<usize> = AnaphorClass::ALL.iter().map(|c| balanced.iter().filter(|x| *x == c).count()).collect();
    ensure(sizes == [1454; 3], || format!("undersampled sizes {sizes:?}"))?;

    let toy_docs: Vec<ToyDoc> = toy::dd_corpus(&[("spanbert", 32)]);
    let config = DdConfig { dim: 32, feature_dim: 16, pair_dim: 32, hidden: 64, type_hidden: 64, ..DdConfig::default() };
    let inputs: Vec<_> = toy_docs.iter().flat_map(|t| dd::prepare_document(&t.doc, &t.store, &config).unwrap()).collect();
    ensure(inputs.len() == 20, || format!("{} toy segments", inputs.len()))?;
    let (model, _) = dd::train_dd(&inputs, config).map_err(|e| e.to_string())?;
    let acc = dd::accuracy(&model, &inputs);
    ensure(acc.antecedent == 1.0 && acc.kind == 1.0, || format!("overfit accuracy {acc:?}"))?;

    let mut none = 0;
    let mut cases = 0;
    for seed in 0..5 {
        let mut m = DdModel::new(DdConfig { dim: 32, feature_dim: 16, pair_dim: 32, hidden: 64, type_hidden: 64, seed, ..DdConfig::default() });
        for (name, v) in [("ffnn_m.2.w", 0.0), ("ffnn_m.2.b", -0.5), ("ffnn_c.2.w", 0.0), ("ffnn_c.2.b", -0.5), ("proj_k.w", 0.0), ("proj_k.b", 0.0)] {
            let id = m.params.by_name(name).unwrap();
            m.params.get_mut(id).data.iter_mut().for_each(|x| *x = v);
        }
        for x in &inputs {
            cases += 1;
            none += m.predict(x).choice.is_none() as usize;
        }
    }
    for _ in 0..1000 {
        let scores: Vec<f64> = (0..rng.gen_range(1..50)).map(|_| -rng.gen_range(1e-9..10.0)).collect();
        cases += 1;
        none += choose_antecedent(&scores).is_none() as usize;
    }
    ensure(none == cases, || format!("NONE on {none}/{cases} negative cases"))?;
    Ok(format!(
        "{segments} segments on {} documents within 256 subtokens; classes undersampled to 1454 each; \
         overfit antecedent {:.0}% type {:.0}%; NONE on {none}/{cases} negative cases",
        docs.len(),
        100.0 * acc.antecedent,
        100.0 * acc.kind
    ))
}

fn dd_statistics() -> Outcome {
    let mut stats = DdStats::new();
    for d in &class_mix_corpus(4324, 4049, 1454) {
        stats.add_document(d, None, 256);
    }
    let got = [AnaphorClass::NonReferential, AnaphorClass::Identity, AnaphorClass::DiscourseDeixis].map(|c| stats.count(c));
    ensure(stats.segments == 9827 && got == [4324, 4049, 1454], || format!("{} segments, counts {got:?}", stats.segments))?;
    let pct = [AnaphorClass::NonReferential, AnaphorClass::Identity, AnaphorClass::DiscourseDeixis]
        .map(|c| format!("{:.1}", stats.percent(c)));
    ensure(pct == ["44.0", "41.2", "14.8"], || format!("percentages {pct:?}"))?;
    Ok(format!("9827 segments: NONREF {}% ID {}% DD {}%", pct[0], pct[1], pct[2]))
}

fn bridging_overfit() -> Outcome {
    let docs = toy::bridging_corpus(&[("bert", 64)]);
    let config = BridgingConfig { dim: 64, feature_dim: 20, hidden: 128, ..BridgingConfig::default() };
    ensure(config.epochs == 5 && config.lr == 3e-3 && config.depth == 2, || "defaults changed".into())?;
    let inputs: Vec<_> = docs.iter().flat_map(|d| bridging::prepare_document(&d.doc, &d.store, &config).unwrap().0).collect();
    ensure(inputs.len() == 30, || format!("{} instances", inputs.len()))?;
    let (model, _) = bridging::train_bridging(&inputs, config).map_err(|e| e.to_string())?;
    let acc = bridging::accuracy(&model, &inputs);
    let mut counts = anaphora::metrics::Counts::default();
    for d in &docs {
        let (x, _) = bridging::prepare_document(&d.doc, &d.store, &model.config).unwrap();
        let (instances, _) = bridging::build_instances(&d.doc);
        let gold: Vec<_> = instances.into_iter().map(|i| anaphora::corpus::Link { anaphor: i.anaphor, antecedent: i.gold }).collect();
        counts += anaphora::metrics::entity_counts(&gold, &bridging::predict(&model, &x), &d.doc.entity_set()).map_err(|e| e.to_string())?;
    }
    let f1 = 100.0 * counts.prf().f1;
    ensure(acc == 1.0 && (f1 - 100.0).abs() < 1e-9, || format!("accuracy {acc}, Entity-F1 {f1}"))?;
    Ok(format!("accuracy {:.0}%, Entity-F1 {f1:.1}", 100.0 * acc))
}

fn format_round_trip() -> Outcome {
    let mut docs = 0;
    let canonical = fixtures("canonical");
    for f in &canonical {
        let text = fs::read_to_string(f).unwrap();
        let parsed = parse_corpus(&text).map_err(|e| format!("{}: {e}", f.display()))?;
        ensure(write_corpus(&parsed) == text, || format!("{} changed on write", f.display()))?;
        docs += parsed.len();
    }
    let malformed = fixtures("malformed");
    for f in &malformed {
        let name = f.file_name().unwrap().to_string_lossy().to_string();
        let err = match parse_corpus(&fs::read_to_string(f).unwrap()) {
            Ok(_) => return Err(format!("{name} parsed")),
            Err(e) => e,
        };
        let ok = match name.as_str() {
            "bad_flag.ua" | "short_row.ua" | "index_gap.ua" => matches!(err, CorpusError::MalformedRow { .. }),
            "duplicate_attribute.ua" => matches!(err, CorpusError::DuplicateAttribute { .. }),
            "duplicate_id.ua" => matches!(err, CorpusError::DuplicateMentionId { .. }),
            "no_header.ua" | "unclosed.ua" => matches!(err, CorpusError::Framing { .. }),
            "self_link.ua" => matches!(err, CorpusError::InvalidLink { .. }),
            "unbalanced.ua" => matches!(err, CorpusError::UnbalancedBrackets { .. }),
            "unknown_mention.ua" => matches!(err, CorpusError::UnknownMention { .. }),
            _ => false,
        };
        ensure(ok, || format!("{name}: unexpected {err:?}"))?;
    }
    Ok(format!("{} files / {docs} documents identical; {} malformed files rejected", canonical.len(), malformed.len()))
}

fn anaphora_bin(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_anaphora"))
        .args(["--jobs", "2"])
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
}

/// Every subcommand run in `dir` against the bundles in `data`.
fn cli_session(data: &Path, dir: &Path) -> Result<Vec<PathBuf>, String> {
    let d = |p: &str| data.join(p).to_string_lossy().to_string();
    let o = |p: &str| dir.join(p).to_string_lossy().to_string();
    let runs: Vec<Vec<String>> = vec![
        vec!["validate".into(), d("wcs.ua"), d("dd.ua"), d("br.ua"), "--manifests".into(), d("wcs-emb"), d("dd-emb"), d("br-emb"), "--out".into(), o("validate.txt")],
        vec!["train-wcs".into(), "--corpus".into(), d("wcs.ua"), "--manifests".into(), d("wcs-emb"), "--model".into(), o("wcs.ckpt"), "--loss-log".into(), o("wcs-loss.csv"), "--config".into(), d("wcs.json")],
        vec!["predict-wcs".into(), "--corpus".into(), d("wcs.ua"), "--manifests".into(), d("wcs-emb"), "--model".into(), o("wcs.ckpt"), "--out".into(), o("wcs-pred.ua")],
        vec!["train-dd".into(), "--corpus".into(), d("dd.ua"), "--manifests".into(), d("dd-emb"), "--model".into(), o("dd.ckpt"), "--loss-log".into(), o("dd-loss.csv"), "--config".into(), d("dd.json")],
        vec!["predict-dd".into(), "--corpus".into(), d("dd.ua"), "--manifests".into(), d("dd-emb"), "--model".into(), o("dd.ckpt"), "--out".into(), o("dd-pred.ua"), "--error-report".into(), o("dd-errors.csv")],
        vec!["train-bridging".into(), "--corpus".into(), d("br.ua"), "--manifests".into(), d("br-emb"), "--model".into(), o("br.ckpt"), "--loss-log".into(), o("br-loss.csv"), "--config".into(), d("br.json")],
        vec!["predict-bridging".into(), "--corpus".into(), d("br.ua"), "--manifests".into(), d("br-emb"), "--model".into(), o("br.ckpt"), "--out".into(), o("br-pred.ua")],
        vec!["combine".into(), "--base".into(), o("wcs-pred.ua"), "--singletons".into(), d("wcs.ua"), "--filter".into(), "--manifests".into(), d("wcs-emb"), "--out".into(), o("combined.ua")],
        vec!["combine".into(), "--base".into(), o("wcs-pred.ua"), "--singletons".into(), d("wcs.ua"), "--mode".into(), "pronoun-partition".into(), "--out".into(), o("pronoun.ua")],
        vec!["score".into(), "--key".into(), d("wcs.ua"), "--response".into(), o("combined.ua"), "--json".into(), o("score.json"), "--out".into(), o("score.txt")],
        vec!["score".into(), "--key".into(), d("br.ua"), "--response".into(), o("br-pred.ua"), "--bridging".into(), "--no-singletons".into(), "--out".into(), o("score-br.txt")],
        vec!["dd-stats".into(), "--corpus".into(), d("dd.ua"), "--manifests".into(), d("dd-emb"), "--json".into(), o("stats.json"), "--out".into(), o("stats.txt")],
    ];
    for args in &runs {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        anaphora_bin(&refs, dir)?;
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    fs::create_dir_all(&data).unwrap();
    toy::write_bundle(&data, "wcs", &toy::wcs_corpus(&[("bert", 8), ("glove", 4)])).unwrap();
    toy::write_bundle(&data, "dd", &toy::dd_corpus(&[("spanbert", 8)])).unwrap();
    toy::write_bundle(&data, "br", &toy::bridging_corpus(&[("bert", 8)])).unwrap();
    let wcs = serde_json::json!({
        "encoders": [
            {"space": "bert", "input": "head", "dim": 8, "hidden": 8, "output": 4},
            {"space": "glove", "input": "span", "dim": 4, "hidden": 8, "output": 4}
        ],
        "feature_dim": 4, "scorer_hidden": 8, "epochs": 2, "seed": 3
    });
    let dd = serde_json::json!({"dim": 8, "feature_dim": 4, "pair_dim": 4, "hidden": 8, "type_hidden": 8, "epochs": 2, "seed": 3});
    let br = serde_json::json!({"dim": 8, "feature_dim": 4, "hidden": 8, "epochs": 2, "seed": 3});
    for (name, v) in [("wcs.json", wcs), ("dd.json", dd), ("br.json", br)] {
        fs::write(data.join(name), v.to_string()).unwrap();
    }
    let (a, b) = (tmp.path().join("run-a"), tmp.path().join("run-b"));
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    let fa = cli_session(&data, &a)?;
    let fb = cli_session(&data, &b)?;
    ensure(fa.len() == fb.len(), || "different output file sets".into())?;
    for (x, y) in fa.iter().zip(&fb) {
        ensure(x.file_name() == y.file_name(), || format!("{} vs {}", x.display(), y.display()))?;
        let (bx, by) = (fs::read(x).unwrap(), fs::read(y).unwrap());
        ensure(!bx.is_empty(), || format!("{} is empty", x.display()))?;
        ensure(bx == by, || format!("{} differs between runs", x.file_name().unwrap().to_string_lossy()))?;
    }
    Ok(format!("10 subcommands, {} output files byte-identical across two runs", fa.len()))
}

fn main() {
    let criteria: [(&str, Option<Duration>, fn() -> Outcome); 9] = [
        ("metric oracle equivalence", Some(Duration::from_secs(10)), metric_oracles),
        ("singleton-merge enumeration", Some(Duration::from_secs(5)), singleton_merge),
        ("gradient checks", Some(Duration::from_secs(120)), gradient_checks),
        ("WCS overfit", Some(Duration::from_secs(60)), wcs_overfit),
        ("DD pipeline", None, dd_pipeline),
        ("DD class statistics", None, dd_statistics),
        ("bridging overfit", Some(Duration::from_secs(30)), bridging_overfit),
        ("format round-trip", None, format_round_trip),
        ("determinism", None, determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.1?}, limit {l:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS  {name} [{elapsed:.1?}]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} [{elapsed:.1?}]: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
