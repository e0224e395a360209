//! Bridging resolution for gold anaphors.
//!
//! Each annotated bridging anaphor is scored against every gold mention
//! that starts before it. Scores come from a feed-forward pair scorer over
//! span representations, after the anaphor representation has been
//! refined twice with its expected antecedent. Training minimizes the
//! cross-entropy of the gold antecedent.

pub mod model;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use model::{choose, BridgingConfig, BridgingModel, InstanceInput, SpanInput};

use crate::checkpoint::{CheckpointError, LossLog};
use crate::corpus::{Document, Link, Mention};
use crate::embeddings::{EmbeddingError, EmbeddingStore};
use crate::metrics::{self, MetricsError};
use crate::nn::{Adam, ConstRows, Graph};

#[derive(Debug, thiserror::Error)]
pub enum BridgingError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("non-finite loss in `{doc}` at anaphor `{anaphor}`")]
    NonFiniteLoss { doc: String, anaphor: String },
    #[error("bad configuration: {0}")]
    Config(String),
}

pub const LOSS_COLUMNS: [&str; 1] = ["total"];

/// An anaphor and the ids of the mentions it may point back to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgingInstance {
    pub doc_id: String,
    pub anaphor: String,
    /// Every gold mention starting before the anaphor, in document order.
    pub candidates: Vec<String>,
    pub gold: String,
}

/// Anaphors left out of training and scoring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Skipped {
    pub no_candidates: usize,
    pub gold_not_in_candidates: usize,
}

impl std::ops::AddAssign for Skipped {
    fn add_assign(&mut self, o: Skipped) {
        self.no_candidates += o.no_candidates;
        self.gold_not_in_candidates += o.gold_not_in_candidates;
    }
}

fn candidates_of<'d>(doc: &'d Document, anaphor: &Mention) -> Vec<&'d Mention> {
    doc.mentions.iter().filter(|m| m.id != anaphor.id && m.span.start < anaphor.span.start).collect()
}

/// One instance per bridging link of `doc`. Anaphors without preceding
/// mentions, or whose antecedent is not among them, are skipped.
pub fn build_instances(doc: &Document) -> (Vec<BridgingInstance>, Skipped) {
    let mut out = Vec::new();
    let mut skipped = Skipped::default();
    for link in &doc.bridging {
        let Some(anaphor) = doc.mention(&link.anaphor) else { continue };
        let candidates: Vec<String> = candidates_of(doc, anaphor).iter().map(|m| m.id.clone()).collect();
        if candidates.is_empty() {
            log::warn!("{}: bridging anaphor `{}` has no preceding mention", doc.id, link.anaphor);
            skipped.no_candidates += 1;
            continue;
        }
        if !candidates.contains(&link.antecedent) {
            log::warn!("{}: antecedent of bridging anaphor `{}` does not precede it", doc.id, link.anaphor);
            skipped.gold_not_in_candidates += 1;
            continue;
        }
        out.push(BridgingInstance {
            doc_id: doc.id.clone(),
            anaphor: link.anaphor.clone(),
            candidates,
            gold: link.antecedent.clone(),
        });
    }
    (out, skipped)
}

fn speakers(doc: &Document) -> HashMap<&str, usize> {
    let mut map = HashMap::new();
    for t in &doc.tokens {
        let next = map.len();
        map.entry(t.speaker.as_str()).or_insert(next);
    }
    map
}

fn span_input(doc: &Document, store: &EmbeddingStore, speakers: &HashMap<&str, usize>, m: &Mention) -> SpanInput {
    SpanInput {
        id: m.id.clone(),
        rows: store.subtokens_of(m.span.start).start..store.subtokens_of(m.span.end).end,
        speaker: speakers[doc.tokens[m.span.start].speaker.as_str()],
    }
}

/// Document matrix for `space`.
pub fn document_rows(store: &EmbeddingStore, space: &str) -> Result<ConstRows, BridgingError> {
    let dim = store.dim(space)?;
    let rows = (0..store.subtoken_total())
        .map(|r| store.subtoken_vector(space, r).map(<[f64]>::to_vec))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConstRows::new(rows, dim))
}

/// Model inputs for the given anaphor ids of `doc`; `gold` maps an anaphor
/// to its gold antecedent when known. Anaphors without a preceding mention
/// are left out.
pub fn prepare(
    doc: &Document,
    store: &EmbeddingStore,
    anaphors: &[(String, Option<String>)],
    config: &BridgingConfig,
) -> Result<Vec<InstanceInput>, BridgingError> {
    store.check_document(doc)?;
    let rows = document_rows(store, &config.space)?;
    let spk = speakers(doc);
    let mut out = Vec::new();
    for (id, gold) in anaphors {
        let Some(a) = doc.mention(id) else { continue };
        let cands = candidates_of(doc, a);
        if cands.is_empty() {
            continue;
        }
        out.push(InstanceInput {
            doc_id: doc.id.clone(),
            rows: rows.clone(),
            anaphor: span_input(doc, store, &spk, a),
            candidates: cands.iter().map(|m| span_input(doc, store, &spk, m)).collect(),
            gold: gold.as_ref().and_then(|g| cands.iter().position(|m| &m.id == g)),
        });
    }
    Ok(out)
}

/// Training inputs from the gold bridging links of `doc`.
pub fn prepare_document(
    doc: &Document,
    store: &EmbeddingStore,
    config: &BridgingConfig,
) -> Result<(Vec<InstanceInput>, Skipped), BridgingError> {
    let (instances, skipped) = build_instances(doc);
    let anaphors: Vec<(String, Option<String>)> =
        instances.into_iter().map(|i| (i.anaphor, Some(i.gold))).collect();
    Ok((prepare(doc, store, &anaphors, config)?, skipped))
}

/// One optimizer step per instance. Row 0 of the loss log is the
/// untrained model's mean loss.
pub fn train_bridging(inputs: &[InstanceInput], config: BridgingConfig) -> Result<(BridgingModel, LossLog), BridgingError> {
    let mut config = config;
    if let Some(first) = inputs.first() {
        if first.rows.dim != config.dim {
            log::info!("bridging input width {} taken from the data", first.rows.dim);
            config.dim = first.rows.dim;
        }
    }
    let usable: Vec<&InstanceInput> = inputs.iter().filter(|x| x.gold.is_some()).collect();
    let mut model = BridgingModel::new(config);
    let mut log = LossLog::new(&LOSS_COLUMNS);
    let n = usable.len().max(1) as f64;
    let initial: f64 = usable.iter().filter_map(|x| model.loss(x)).sum();
    log.push(0, vec![initial / n]);
    let mut adam = Adam::new(&model.params, model.config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..usable.len()).collect();
    for epoch in 1..=model.config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for &i in &order {
            let x = usable[i];
            let (loss, grads) = {
                let mut g = Graph::training(&model.params, model.config.dropout, &mut rng);
                let v = model.loss_var(&mut g, x).expect("instances with gold and candidates");
                (g.scalar(v), g.backward(v))
            };
            if !loss.is_finite() {
                return Err(BridgingError::NonFiniteLoss { doc: x.doc_id.clone(), anaphor: x.anaphor.id.clone() });
            }
            adam.step(&mut model.params, &grads);
            sum += loss;
        }
        log::info!("bridging epoch {epoch}: total {:.6}", sum / n);
        log.push(epoch, vec![sum / n]);
    }
    Ok((model, log))
}

/// Predicted links for `inputs`.
pub fn predict(model: &BridgingModel, inputs: &[InstanceInput]) -> Vec<Link> {
    inputs
        .iter()
        .filter_map(|x| {
            model
                .resolve(x)
                .map(|i| Link { anaphor: x.anaphor.id.clone(), antecedent: x.candidates[i].id.clone() })
        })
        .collect()
}

/// Share of inputs whose predicted antecedent is the gold one.
pub fn accuracy(model: &BridgingModel, inputs: &[InstanceInput]) -> f64 {
    let usable: Vec<&InstanceInput> = inputs.iter().filter(|x| x.gold.is_some()).collect();
    let right = usable.iter().filter(|x| model.resolve(x) == x.gold).count();
    right as f64 / usable.len().max(1) as f64
}

/// Entity-F1 of `predicted` against the links of `doc`, restricted to the
/// anaphors that could be resolved.
pub fn entity_f1(doc: &Document, predicted: &[Link]) -> Result<f64, BridgingError> {
    let (instances, _) = build_instances(doc);
    let gold: Vec<Link> = instances.into_iter().map(|i| Link { anaphor: i.anaphor, antecedent: i.gold }).collect();
    Ok(metrics::entity_f1(&gold, predicted, &doc.entity_set())?)
}

/// `doc` with its bridging links replaced by `links`.
pub fn apply_predictions(doc: &Document, links: &[Link]) -> Document {
    let mut out = doc.clone();
    out.bridging = links.to_vec();
    out.normalize();
    out
}
