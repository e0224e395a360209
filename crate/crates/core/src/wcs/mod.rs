//! Incremental workspace coreference clustering.
//!
//! Mentions are visited in document order. Each one is scored against the
//! clusters still active in the workspace (mean of member pair logits) and
//! a NEW option, then placed in the most probable one. Training combines a
//! clustering loss against ratio targets, a pairwise coherence loss and a
//! referring-expression loss, with one optimizer step per mention.

pub mod model;
pub mod targets;
pub mod workspace;

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use model::{EncoderInput, EncoderSpec, MentionInput, Side, StepVars, WcsConfig, WcsModel};
pub use workspace::{Choice, ClusterState, Workspace};

use crate::checkpoint::{CheckpointError, LossLog};
use crate::combiner::is_pronoun_span;
use crate::corpus::{Document, EntitySet, Partition};
use crate::embeddings::{EmbeddingError, EmbeddingStore};
use crate::nn::{Adam, Grads, Graph, Var};

#[derive(Debug, thiserror::Error)]
pub enum WcsError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("space `{space}`: encoder expects width {expected}, store has {found}")]
    DimMismatch { space: String, expected: usize, found: usize },
    #[error("non-finite loss in `{doc}` at mention {step}")]
    NonFiniteLoss { doc: String, step: usize },
    #[error("bad configuration: {0}")]
    Config(String),
}

pub const LOSS_COLUMNS: [&str; 4] = ["clustering", "coherence", "referring", "total"];

/// Per-document loss components, each already normalized (clustering and
/// referring by mention count, coherence by pair count).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub clustering: f64,
    pub coherence: f64,
    pub referring: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.clustering + self.coherence + self.referring
    }

    fn add(&mut self, o: &LossParts) {
        self.clustering += o.clustering;
        self.coherence += o.coherence;
        self.referring += o.referring;
    }

    fn row(&self, n: usize) -> Vec<f64> {
        let d = n.max(1) as f64;
        vec![self.clustering / d, self.coherence / d, self.referring / d, self.total() / d]
    }
}

/// What one mention's step left behind for later coherence terms.
#[derive(Debug, Clone)]
struct StepRecord {
    options: Vec<usize>,
    opened: Option<usize>,
    probs: Vec<f64>,
    var: Option<Var>,
}

impl StepRecord {
    /// Position in this step's distribution that puts the mention in
    /// cluster `id`.
    fn slot_for(&self, id: usize) -> Option<usize> {
        self.options
            .iter()
            .position(|o| *o == id)
            .or_else(|| (self.opened == Some(id)).then_some(self.options.len()))
    }
}

#[derive(Debug, Clone)]
pub struct DocumentRun {
    pub losses: LossParts,
    pub workspace: Workspace,
    /// Referring probability per mention ordinal.
    pub referring: Vec<f64>,
}

fn argmax_choice(probs: &[f64]) -> Choice {
    let mut best = 0;
    for (k, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = k;
        }
    }
    if best + 1 == probs.len() {
        Choice::New
    } else {
        Choice::Cluster(best)
    }
}

/// Active cluster holding the most recent earlier mention of the same gold
/// entity, NEW if there is none.
pub fn teacher_choice(inputs: &[MentionInput], ws: &Workspace, t: usize) -> Choice {
    let Some(e) = &inputs[t].entity else { return Choice::New };
    (0..t)
        .rev()
        .find(|&i| inputs[i].entity.as_ref() == Some(e))
        .and_then(|i| ws.active_position(i))
        .map_or(Choice::New, Choice::Cluster)
}

fn same_gold(inputs: &[MentionInput], i: usize, j: usize) -> bool {
    matches!((&inputs[i].entity, &inputs[j].entity), (Some(a), Some(b)) if a == b)
}

/// Builds the loss of step `t`. Earlier mentions enter the coherence term
/// through their recorded distributions: as graph nodes when `records`
/// carry them (whole-document graphs), otherwise as constants.
fn step_loss(
    g: &mut Graph,
    vars: &StepVars,
    ws: &Workspace,
    t: usize,
    inputs: &[MentionInput],
    records: &[StepRecord],
) -> (Var, LossParts) {
    let n = inputs.len() as f64;
    let entity: Vec<Option<&String>> = inputs.iter().map(|m| m.entity.as_ref()).collect();
    let target = targets::gold_target_distribution(t, ws, &entity);
    let ce = g.cross_entropy(vars.logits, &target);
    let ce = g.scale(ce, 1.0 / n);
    let label = if inputs[t].referring { 1.0 } else { 0.0 };
    let rf = g.bce_logits(vars.referring_logit, label);
    let rf = g.scale(rf, 1.0 / n);
    let mut parts = LossParts { clustering: g.scalar(ce), referring: g.scalar(rf), coherence: 0.0 };
    let mut terms = vec![ce, rf];

    let pairs = inputs.len() * (inputs.len() - 1) / 2;
    let mut coherence = Vec::new();
    for (i, rec) in records.iter().enumerate().take(t) {
        let slots: Vec<Option<usize>> = ws.active.iter().map(|c| rec.slot_for(c.id)).collect();
        if slots.iter().all(Option::is_none) {
            // Every cluster mention i could be in has left the workspace.
            continue;
        }
        let aligned = match rec.var {
            Some(v) => {
                let mut cells: Vec<Var> = slots
                    .iter()
                    .map(|s| match s {
                        Some(k) => g.index(v, *k),
                        None => g.constant(0.0),
                    })
                    .collect();
                cells.push(g.constant(0.0));
                g.concat(&cells)
            }
            None => {
                let mut w: Vec<f64> = slots.iter().map(|s| s.map_or(0.0, |k| rec.probs[k])).collect();
                w.push(0.0);
                g.input(w)
            }
        };
        let p = g.dot(vars.probs, aligned);
        let y = if same_gold(inputs, i, t) { 1.0 } else { 0.0 };
        coherence.push(g.bce_prob(p, y));
    }
    if !coherence.is_empty() {
        let sum = g.sum_of(&coherence);
        let c = g.scale(sum, 1.0 / pairs as f64);
        parts.coherence = g.scalar(c);
        terms.push(c);
    }
    (g.sum_of(&terms), parts)
}

fn record(ws: &Workspace, choice: Choice, probs: Vec<f64>, var: Option<Var>) -> StepRecord {
    StepRecord {
        options: ws.active.iter().map(|c| c.id).collect(),
        opened: (choice == Choice::New).then(|| ws.next_id()),
        probs,
        var,
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl WcsModel {
    /// Eval-mode pass over a document with the model's own decisions.
    pub fn run_document(&self, inputs: &[MentionInput], with_loss: bool) -> DocumentRun {
        let mut ws = Workspace::new(self.config.eviction);
        let mut records = Vec::with_capacity(inputs.len());
        let mut losses = LossParts::default();
        let mut referring = Vec::with_capacity(inputs.len());
        for t in 0..inputs.len() {
            let mut g = Graph::new(&self.params);
            let new = self.new_side(&mut g);
            let mut side = |g: &mut Graph, m: usize| self.side(g, &inputs[m], m);
            let vars = self.step(&mut g, &ws, t, &new, &mut side);
            if with_loss {
                let (_, parts) = step_loss(&mut g, &vars, &ws, t, inputs, &records);
                losses.add(&parts);
            }
            let probs = g.value(vars.probs).to_vec();
            referring.push(sigmoid(g.scalar(vars.referring_logit)));
            let choice = argmax_choice(&probs);
            records.push(record(&ws, choice, probs, None));
            ws.place(t, choice);
        }
        DocumentRun { losses, workspace: ws, referring }
    }

    /// One training pass over a document: an optimizer step after every
    /// mention, teacher forcing with the configured probability.
    pub fn train_document(
        &mut self,
        doc_id: &str,
        inputs: &[MentionInput],
        adam: &mut Adam,
        rng: &mut ChaCha8Rng,
    ) -> Result<LossParts, WcsError> {
        let mut ws = Workspace::new(self.config.eviction);
        let mut records = Vec::with_capacity(inputs.len());
        let mut losses = LossParts::default();
        for t in 0..inputs.len() {
            let forced = rng.gen::<f64>() < self.config.teacher_forcing;
            let (probs, parts, grads) = {
                let model = &*self;
                let mut g = Graph::training(&model.params, model.config.dropout, rng);
                let new = model.new_side(&mut g);
                let mut side = |g: &mut Graph, m: usize| model.side(g, &inputs[m], m);
                let vars = model.step(&mut g, &ws, t, &new, &mut side);
                let (loss, parts) = step_loss(&mut g, &vars, &ws, t, inputs, &records);
                if !g.scalar(loss).is_finite() {
                    return Err(WcsError::NonFiniteLoss { doc: doc_id.into(), step: t });
                }
                (g.value(vars.probs).to_vec(), parts, g.backward(loss))
            };
            adam.step(&mut self.params, &grads);
            losses.add(&parts);
            let choice = if forced { teacher_choice(inputs, &ws, t) } else { argmax_choice(&probs) };
            records.push(record(&ws, choice, probs, None));
            ws.place(t, choice);
        }
        Ok(losses)
    }

    /// Total loss of a document and its exact gradient, from a single graph
    /// in eval mode with every decision teacher-forced. The decision trace
    /// then depends only on the gold annotation, which makes the loss a
    /// smooth function of the parameters.
    pub fn gradient_loss(&self, inputs: &[MentionInput]) -> (f64, Grads) {
        let mut g = Graph::new(&self.params);
        let new = self.new_side(&mut g);
        let sides: Vec<Side> = inputs.iter().enumerate().map(|(m, x)| self.side(&mut g, x, m)).collect();
        let mut ws = Workspace::new(self.config.eviction);
        let mut records = Vec::with_capacity(inputs.len());
        let mut totals = Vec::with_capacity(inputs.len());
        for t in 0..inputs.len() {
            let mut side = |_: &mut Graph, m: usize| sides[m].clone();
            let vars = self.step(&mut g, &ws, t, &new, &mut side);
            let (loss, _) = step_loss(&mut g, &vars, &ws, t, inputs, &records);
            totals.push(loss);
            let choice = teacher_choice(inputs, &ws, t);
            records.push(record(&ws, choice, g.value(vars.probs).to_vec(), Some(vars.probs)));
            ws.place(t, choice);
        }
        if totals.is_empty() {
            return (0.0, Grads::zeros_like(&self.params));
        }
        let total = g.sum_of(&totals);
        (g.scalar(total), g.backward(total))
    }

    /// Clusters a document. Mentions the referring head rejects are
    /// dropped, then clusters sharing the lowercased text of a
    /// non-pronominal mention are merged.
    pub fn predict_document(&self, doc: &Document, store: &EmbeddingStore) -> Result<WcsPrediction, WcsError> {
        let inputs = self.prepare(doc, store)?;
        let run = self.run_document(&inputs, false);
        let clusters: Vec<Vec<usize>> = run
            .workspace
            .clusters()
            .iter()
            .map(|c| c.members.iter().copied().filter(|m| run.referring[*m] >= 0.5).collect::<Vec<_>>())
            .filter(|c| !c.is_empty())
            .collect();

        let mut parent: Vec<usize> = (0..clusters.len()).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            parent[x] = r;
            r
        }
        let mut owner: HashMap<String, usize> = HashMap::new();
        for (k, c) in clusters.iter().enumerate() {
            for m in c {
                let span = inputs[*m].span;
                if is_pronoun_span(doc, span) {
                    continue;
                }
                let key = doc.span_text(span).to_lowercase();
                match owner.get(&key) {
                    Some(&other) => {
                        let (a, b) = (find(&mut parent, other), find(&mut parent, k));
                        parent[a.max(b)] = a.min(b);
                    }
                    None => {
                        owner.insert(key, k);
                    }
                }
            }
        }
        let mut merged: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for (k, c) in clusters.iter().enumerate() {
            let root = find(&mut parent, k);
            merged.entry(root).or_default().extend(c.iter().map(|m| inputs[*m].id.clone()));
        }
        let partition = Partition::new(merged.into_values()).expect("workspace clusters are disjoint");
        let referring = inputs.iter().zip(&run.referring).map(|(m, p)| (m.id.clone(), *p)).collect();
        Ok(WcsPrediction { partition, referring })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WcsPrediction {
    pub partition: EntitySet,
    /// Referring probability per mention id.
    pub referring: BTreeMap<String, f64>,
}

/// Mean eval-mode losses over documents.
pub fn evaluate(model: &WcsModel, inputs: &[Vec<MentionInput>]) -> Vec<f64> {
    let mut sum = LossParts::default();
    for doc in inputs {
        sum.add(&model.run_document(doc, true).losses);
    }
    sum.row(inputs.len())
}

/// Trains a fresh model. The loss log's row 0 is the eval-mode loss before
/// training; rows 1.. are per-epoch training means.
pub fn train_wcs(docs: &[(&Document, &EmbeddingStore)], config: WcsConfig) -> Result<(WcsModel, LossLog), WcsError> {
    let config = match docs.first() {
        Some((_, store)) => config.with_store_dims(store)?,
        None => config,
    };
    let mut model = WcsModel::new(config);
    let inputs = docs
        .iter()
        .map(|(d, s)| model.prepare(d, s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut log = LossLog::new(&LOSS_COLUMNS);
    log.push(0, evaluate(&model, &inputs));
    let mut adam = Adam::new(&model.params, model.config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed.wrapping_add(1));
    for epoch in 1..=model.config.epochs {
        let mut sum = LossParts::default();
        for ((doc, _), doc_inputs) in docs.iter().zip(&inputs) {
            sum.add(&model.train_document(&doc.id, doc_inputs, &mut adam, &mut rng)?);
        }
        let row = sum.row(docs.len());
        log::info!("wcs epoch {epoch}: total {:.6}", row[3]);
        log.push(epoch, row);
    }
    Ok((model, log))
}
