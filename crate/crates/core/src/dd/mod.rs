//! Discourse-deixis resolution.
//!
//! Every occurrence of `this`, `that`, `it` or `which` gets its own segment
//! of preceding context. All spans of the segment are scored against the
//! anaphor; a fixed zero score lets the resolver reject them all. The
//! chosen antecedent then feeds a three-way anaphor type classifier.

pub mod analysis;
pub mod model;
pub mod segments;
pub mod stats;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use analysis::{split_heuristic, Border, ErrorCase, ErrorReport};
pub use model::{
    choose_antecedent, prepare_segment, AnaphorSelection, CandidateInput, DdConfig, DdLoss, DdModel, DdPrediction,
    ScoreParts, SegmentInput,
};
pub use segments::{
    build_segments, build_segments_at, candidate_anaphors, enumerate_candidates, label_segment, labeled_segments,
    undersample, AnaphorClass, LabeledSegment, Segment, DEFAULT_SEGMENT_LIMIT,
};
pub use stats::DdStats;

use crate::checkpoint::{CheckpointError, LossLog};
use crate::corpus::{AnaphorKind, DiscourseStatus, Document, Link, Mention, Span};
use crate::embeddings::{EmbeddingError, EmbeddingStore};
use crate::nn::{Adam, Graph};

#[derive(Debug, thiserror::Error)]
pub enum DdError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("`{0}`: document subtoken counts disagree with the embedding store")]
    SubtokenMismatch(String),
    #[error("non-finite loss in `{doc}` at anaphor {anaphor}")]
    NonFiniteLoss { doc: String, anaphor: usize },
    #[error("bad configuration: {0}")]
    Config(String),
}

pub const LOSS_COLUMNS: [&str; 5] = ["antecedent", "type", "label", "constituent", "total"];

/// Labeled segments of `doc` under the configured anaphor selection, with
/// subtoken counts taken from `store`.
pub fn document_segments(doc: &Document, store: &EmbeddingStore, config: &DdConfig) -> Result<Vec<LabeledSegment>, DdError> {
    let mut doc = doc.clone();
    store.apply_subtoken_counts(&mut doc)?;
    Ok(match config.anaphors {
        AnaphorSelection::Forms => labeled_segments(&doc, config.segment_limit),
        AnaphorSelection::Gold => segments::gold_labeled_segments(&doc, config.segment_limit, |s| store.head_token(s)),
    })
}

/// Model inputs for every segment of `doc`.
pub fn prepare_document(doc: &Document, store: &EmbeddingStore, config: &DdConfig) -> Result<Vec<SegmentInput>, DdError> {
    let mut counted = doc.clone();
    store.apply_subtoken_counts(&mut counted)?;
    document_segments(doc, store, config)?
        .iter()
        .map(|s| prepare_segment(&counted, store, s, config))
        .collect()
}

fn mean_loss(model: &DdModel, inputs: &[&SegmentInput]) -> Vec<f64> {
    let mut sum = DdLoss::default();
    for x in inputs {
        if let Some(l) = model.loss(x) {
            sum.antecedent += l.antecedent;
            sum.kind += l.kind;
            sum.label += l.label;
            sum.constituent += l.constituent;
            sum.total += l.total;
        }
    }
    let n = inputs.len().max(1) as f64;
    sum.row().into_iter().map(|v| v / n).collect()
}

/// Trains on `inputs` one segment per optimizer step. Segments without a
/// usable gold antecedent are skipped. Row 0 of the loss log is the
/// untrained model's mean loss.
pub fn train_dd(inputs: &[SegmentInput], config: DdConfig) -> Result<(DdModel, LossLog), DdError> {
    let mut config = config;
    if let Some(first) = inputs.first() {
        if first.token.len() != config.dim {
            log::info!("dd input width {} taken from the data", first.token.len());
            config.dim = first.token.len();
        }
    }
    let usable: Vec<&SegmentInput> = inputs.iter().filter(|x| x.trainable()).collect();
    if usable.len() < inputs.len() {
        log::warn!("skipping {} segments without a gold antecedent candidate", inputs.len() - usable.len());
    }
    let mut model = DdModel::new(config);
    let mut log = LossLog::new(&LOSS_COLUMNS);
    log.push(0, mean_loss(&model, &usable));
    let mut adam = Adam::new(&model.params, model.config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..usable.len()).collect();
    for epoch in 1..=model.config.epochs {
        order.shuffle(&mut rng);
        let mut sum = vec![0.0; LOSS_COLUMNS.len()];
        for &i in &order {
            let x = usable[i];
            let (values, grads) = {
                let mut g = Graph::training(&model.params, model.config.dropout, &mut rng);
                let v = model.loss_vars(&mut g, x).expect("filtered to trainable segments");
                let values: Vec<f64> = v.iter().map(|&t| g.scalar(t)).collect();
                (values, g.backward(v[4]))
            };
            if !values[4].is_finite() {
                return Err(DdError::NonFiniteLoss { doc: x.doc_id.clone(), anaphor: x.anaphor });
            }
            adam.step(&mut model.params, &grads);
            sum.iter_mut().zip(&values).for_each(|(s, v)| *s += v);
        }
        let n = usable.len().max(1) as f64;
        let row: Vec<f64> = sum.iter().map(|s| s / n).collect();
        log::info!("dd epoch {epoch}: total {:.6}", row[4]);
        log.push(epoch, row);
    }
    Ok((model, log))
}

/// Share of segments whose antecedent choice (NONE for non-referential
/// anaphors, any gold span otherwise) and type are right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdAccuracy {
    pub segments: usize,
    pub antecedent: f64,
    pub kind: f64,
}

pub fn accuracy(model: &DdModel, inputs: &[SegmentInput]) -> DdAccuracy {
    let usable: Vec<&SegmentInput> = inputs.iter().filter(|x| x.trainable()).collect();
    let (mut ant, mut kind) = (0, 0);
    for x in &usable {
        let p = model.predict(x);
        let right = match p.choice {
            None => x.class == AnaphorClass::NonReferential,
            Some(i) => x.class != AnaphorClass::NonReferential && x.gold.contains(&i),
        };
        ant += right as usize;
        kind += (p.class == x.class) as usize;
    }
    let n = usable.len().max(1) as f64;
    DdAccuracy { segments: usable.len(), antecedent: ant as f64 / n, kind: kind as f64 / n }
}

/// Replaces the deixis annotation of `doc` with `predictions`: every
/// anaphor classified as DD with a chosen antecedent gets a `dd/old`
/// markable linked to a `dd/new` markable over the antecedent span.
pub fn apply_predictions(doc: &Document, predictions: &[DdPrediction]) -> Document {
    let mut out = doc.clone();
    out.deixis.clear();
    let linked: Vec<&str> = doc.deixis.iter().flat_map(|l| [l.anaphor.as_str(), l.antecedent.as_str()]).collect();
    // Markables that only served the old deixis annotation go too.
    out.mentions.retain(|m| {
        m.gold_entity.is_some()
            || !(m.anaphor_kind == Some(AnaphorKind::DiscourseDeixis) || linked.contains(&m.id.as_str()))
    });
    let mut next = 0;
    let mut fresh = |out: &Document| loop {
        let id = format!("dd{next}");
        next += 1;
        if out.mention(&id).is_none() {
            return id;
        }
    };
    for p in predictions {
        let (Some(span), AnaphorClass::DiscourseDeixis) = (p.antecedent, p.class) else { continue };
        let mut anaphor = Mention::new(fresh(&out), Span::single(p.anaphor));
        anaphor.anaphor_kind = Some(AnaphorKind::DiscourseDeixis);
        anaphor.discourse_status = Some(DiscourseStatus::Old);
        let antecedent_id = match out
            .mentions
            .iter()
            .find(|m| m.span == span && m.extra_spans.is_empty() && m.anaphor_kind == Some(AnaphorKind::DiscourseDeixis))
        {
            Some(m) => m.id.clone(),
            None => {
                let mut m = Mention::new(fresh(&out), span);
                m.anaphor_kind = Some(AnaphorKind::DiscourseDeixis);
                m.discourse_status = Some(DiscourseStatus::New);
                let id = m.id.clone();
                out.mentions.push(m);
                id
            }
        };
        out.deixis.push(Link { anaphor: anaphor.id.clone(), antecedent: antecedent_id });
        out.mentions.push(anaphor);
    }
    out.normalize();
    out
}
