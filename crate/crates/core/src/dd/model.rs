//! Anaphor and candidate encoders, the three-part pair scorer and the
//! anaphor type classifier.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::segments::{enumerate_candidates, AnaphorClass, LabeledSegment};
use super::DdError;
use crate::checkpoint::{self, Checkpoint};
use crate::corpus::{Document, Span};
use crate::embeddings::{ConstituentType, EmbeddingStore, DEP_TAGS, POS_TAGS};
use crate::nn::{bucket, ConstRows, Embedding, Ffnn, Graph, Grads, Linear, ParamId, Params, Init, Var};

pub const CHECKPOINT_KIND: &str = "dd";

/// Lower edges of the sentence-distance buckets.
pub const SENTENCE_BOUNDS: [usize; 7] = [0, 1, 2, 3, 4, 5, 8];
/// Lower edges of the subtoken-distance buckets.
pub const TOKEN_BOUNDS: [usize; 7] = [0, 5, 9, 17, 33, 65, 129];
/// Lower edges of the span-width buckets (in subtokens).
pub const WIDTH_BOUNDS: [usize; 10] = [1, 2, 3, 4, 5, 8, 16, 32, 64, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnaphorSelection {
    /// Every occurrence of the four surface forms.
    Forms,
    /// The annotated discourse-deixis anaphors.
    Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdConfig {
    pub space: String,
    /// Input vector width; replaced by the store's width when they differ.
    pub dim: usize,
    pub feature_dim: usize,
    pub pair_dim: usize,
    pub hidden: usize,
    pub type_hidden: usize,
    /// Subtokens taken on each side of the anaphor for its context vector.
    pub context: usize,
    pub max_width: usize,
    pub segment_limit: usize,
    pub constituent_weight: f64,
    pub anaphors: AnaphorSelection,
    pub undersample: bool,
    pub epochs: usize,
    pub lr: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for DdConfig {
    fn default() -> Self {
        DdConfig {
            space: "spanbert".into(),
            dim: 1024,
            feature_dim: 100,
            pair_dim: 512,
            hidden: 1024,
            type_hidden: 1024,
            context: 8,
            max_width: 40,
            segment_limit: super::DEFAULT_SEGMENT_LIMIT,
            constituent_weight: 0.02,
            anaphors: AnaphorSelection::Forms,
            undersample: true,
            epochs: 24,
            lr: 3e-4,
            dropout: 0.3,
            seed: 0,
        }
    }
}

/// One scored antecedent candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateInput {
    pub span: Span,
    /// Rows of the segment matrix covered by the span.
    pub rows: std::ops::Range<usize>,
    pub kind: ConstituentType,
    pub end_pos: usize,
    pub end_dep: usize,
    pub sentence_distance: usize,
    pub token_distance: usize,
}

/// Everything the model reads for one segment.
#[derive(Debug, Clone)]
pub struct SegmentInput {
    pub doc_id: String,
    pub anaphor: usize,
    /// Subtoken vectors of the window.
    pub rows: ConstRows,
    pub token: Vec<f64>,
    /// Zero when the anaphor has no parent.
    pub parent: Vec<f64>,
    pub context: Vec<f64>,
    pub pos: usize,
    pub dep: usize,
    pub candidates: Vec<CandidateInput>,
    /// Indices into `candidates`.
    pub gold: Vec<usize>,
    pub class: AnaphorClass,
}

impl SegmentInput {
    /// Referential segments need a gold candidate to be trained on.
    pub fn trainable(&self) -> bool {
        self.class == AnaphorClass::NonReferential || !self.gold.is_empty()
    }
}

fn mean_rows(store: &EmbeddingStore, space: &str, rows: impl Iterator<Item = usize>, dim: usize) -> Result<Vec<f64>, DdError> {
    let mut out = vec![0.0; dim];
    let mut n = 0;
    for r in rows {
        for (o, v) in out.iter_mut().zip(store.subtoken_vector(space, r)?) {
            *o += v;
        }
        n += 1;
    }
    if n > 0 {
        out.iter_mut().for_each(|o| *o /= n as f64);
    }
    Ok(out)
}

/// Builds the model input for a labeled segment. The document's subtoken
/// counts must agree with `store`.
pub fn prepare_segment(
    doc: &Document,
    store: &EmbeddingStore,
    labeled: &LabeledSegment,
    config: &DdConfig,
) -> Result<SegmentInput, DdError> {
    let seg = &labeled.segment;
    let space = config.space.as_str();
    let dim = store.dim(space)?;
    let window = store.subtokens_of(seg.tokens.start).start..store.subtokens_of(seg.tokens.end).end;
    if window != seg.subtokens {
        return Err(DdError::SubtokenMismatch(doc.id.clone()));
    }
    let rows = window
        .clone()
        .map(|r| store.subtoken_vector(space, r).map(<[f64]>::to_vec))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = ConstRows::new(rows, dim);
    let own = store.subtokens_of(seg.anaphor);
    let ann = store.annotation(seg.anaphor);
    let token = store.token_vector(space, seg.anaphor)?;
    let parent = match ann.parent {
        Some(p) => store.token_vector(space, p)?,
        None => vec![0.0; dim],
    };
    let left = own.start.saturating_sub(config.context).max(window.start)..own.start;
    let right = own.end..(own.end + config.context).min(window.end);
    let context = mean_rows(store, space, left.chain(right), dim)?;
    let sentence_of = doc.sentence_index();
    let candidates: Vec<CandidateInput> = enumerate_candidates(doc, seg, config.max_width)
        .into_iter()
        .map(|span| {
            let sub = store.subtokens_of(span.start).start..store.subtokens_of(span.end).end;
            let end = store.annotation(span.end);
            CandidateInput {
                span,
                rows: sub.start - window.start..sub.end - window.start,
                kind: store.constituent_type(span),
                end_pos: end.pos_index(),
                end_dep: end.dep_index(),
                sentence_distance: sentence_of[seg.anaphor].abs_diff(sentence_of[span.start]),
                token_distance: own.start.abs_diff(sub.start),
            }
        })
        .collect();
    let gold: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| labeled.gold.contains(&c.span))
        .map(|(i, _)| i)
        .collect();
    if labeled.class != AnaphorClass::NonReferential && gold.is_empty() {
        log::warn!(
            "{}: no gold antecedent of the {} anaphor at token {} is a candidate",
            doc.id,
            labeled.class,
            seg.anaphor
        );
    }
    Ok(SegmentInput {
        doc_id: doc.id.clone(),
        anaphor: seg.anaphor,
        rows,
        token,
        parent,
        context,
        pos: ann.pos_index(),
        dep: ann.dep_index(),
        candidates,
        gold,
        class: labeled.class,
    })
}

#[derive(Debug, Clone)]
struct Layout {
    anaphor_pos: Embedding,
    anaphor_dep: Embedding,
    width: Embedding,
    span_type: Embedding,
    end_pos: Embedding,
    end_dep: Embedding,
    sentence_distance: Embedding,
    token_distance: Embedding,
    attention: ParamId,
    proj_k: Linear,
    proj_q: Linear,
    ffnn_m: Ffnn,
    ffnn_c: Ffnn,
    type_mlp: Ffnn,
}

/// Graph handles of one segment's forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub anaphor: Var,
    pub candidates: Vec<Var>,
    /// Dummy zero first, then one score per candidate.
    pub scores: Var,
    pub mention: Vec<Var>,
    pub fast: Vec<Var>,
    pub slow: Vec<Var>,
}

/// Values of the three score components for one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreParts {
    pub mention: f64,
    pub fast: f64,
    pub slow: f64,
}

impl ScoreParts {
    pub fn total(&self) -> f64 {
        self.mention + self.fast + self.slow
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DdLoss {
    pub antecedent: f64,
    pub kind: f64,
    pub label: f64,
    pub constituent: f64,
    pub total: f64,
}

impl DdLoss {
    pub fn row(&self) -> Vec<f64> {
        vec![self.antecedent, self.kind, self.label, self.constituent, self.total]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdPrediction {
    pub anaphor: usize,
    /// Index into the segment's candidates.
    pub choice: Option<usize>,
    pub antecedent: Option<Span>,
    pub class: AnaphorClass,
    pub class_probs: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct DdModel {
    pub config: DdConfig,
    pub params: Params,
    layout: Layout,
}

/// Index of the winning candidate, or `None` when the dummy zero score is
/// at least as high as every candidate. Among equal maxima the first wins,
/// so with candidates sorted by (start, end) ties go to the earlier start,
/// then the shorter span.
pub fn choose_antecedent(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    let mut top = 0.0;
    for (i, &s) in scores.iter().enumerate() {
        if s > top {
            top = s;
            best = Some(i);
        }
    }
    best
}

impl DdModel {
    pub fn new(config: DdConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let p = &mut Params::new();
        let (d, fd) = (config.dim, config.feature_dim);
        let anaphor_pos = Embedding::new(p, "anaphor_pos", POS_TAGS.len(), fd, &mut rng);
        let anaphor_dep = Embedding::new(p, "anaphor_dep", DEP_TAGS.len(), fd, &mut rng);
        let width = Embedding::new(p, "width", WIDTH_BOUNDS.len(), fd, &mut rng);
        let span_type = Embedding::new(p, "span_type", 3, fd, &mut rng);
        let end_pos = Embedding::new(p, "end_pos", POS_TAGS.len(), fd, &mut rng);
        let end_dep = Embedding::new(p, "end_dep", DEP_TAGS.len(), fd, &mut rng);
        let sentence_distance = Embedding::new(p, "sentence_distance", SENTENCE_BOUNDS.len(), fd, &mut rng);
        let token_distance = Embedding::new(p, "token_distance", TOKEN_BOUNDS.len(), fd, &mut rng);
        let attention = p.add("attention", 1, d, Init::Uniform(0.1), &mut rng);
        let (kw, qw) = Self::widths(&config);
        let pd = config.pair_dim;
        let proj_k = Linear::new(p, "proj_k", kw, pd, &mut rng);
        let proj_q = Linear::new(p, "proj_q", qw, pd, &mut rng);
        let h = config.hidden;
        let ffnn_m = Ffnn::new(p, "ffnn_m", &[qw, h, h, 1], false, &mut rng);
        let ffnn_c = Ffnn::new(p, "ffnn_c", &[kw + qw + 2 * fd + pd, h, h, 1], false, &mut rng);
        let type_mlp = Ffnn::new(p, "type", &[kw + qw, config.type_hidden, 3], false, &mut rng);
        let layout = Layout {
            anaphor_pos,
            anaphor_dep,
            width,
            span_type,
            end_pos,
            end_dep,
            sentence_distance,
            token_distance,
            attention,
            proj_k,
            proj_q,
            ffnn_m,
            ffnn_c,
            type_mlp,
        };
        DdModel { config, params: std::mem::take(p), layout }
    }

    /// Widths of the anaphor and candidate representations.
    fn widths(config: &DdConfig) -> (usize, usize) {
        (3 * config.dim + 2 * config.feature_dim, 3 * config.dim + 4 * config.feature_dim)
    }

    pub fn anaphor_width(&self) -> usize {
        Self::widths(&self.config).0
    }

    pub fn candidate_width(&self) -> usize {
        Self::widths(&self.config).1
    }

    pub fn save(&self, path: &Path) -> Result<(), DdError> {
        Ok(checkpoint::save(path, CHECKPOINT_KIND, &self.config, &self.params)?)
    }

    pub fn load(path: &Path) -> Result<Self, DdError> {
        Self::from_checkpoint(&checkpoint::load(path)?)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, DdError> {
        ck.expect_kind(CHECKPOINT_KIND)?;
        let config: DdConfig = serde_json::from_value(ck.config.clone()).map_err(|e| DdError::Config(e.to_string()))?;
        let mut model = DdModel::new(config);
        ck.restore(&mut model.params)?;
        Ok(model)
    }

    fn anaphor_rep(&self, g: &mut Graph, x: &SegmentInput) -> Var {
        let l = &self.layout;
        let parts = [
            g.input(x.token.clone()),
            g.input(x.parent.clone()),
            g.input(x.context.clone()),
            l.anaphor_pos.lookup(g, x.pos),
            l.anaphor_dep.lookup(g, x.dep),
        ];
        let k = g.concat(&parts);
        g.dropout(k)
    }

    fn candidate_rep(&self, g: &mut Graph, x: &SegmentInput, c: &CandidateInput) -> Var {
        let l = &self.layout;
        let start = g.input(x.rows.row(c.rows.start).to_vec());
        let end = g.input(x.rows.row(c.rows.end - 1).to_vec());
        let w = g.param(l.attention);
        let att = g.rows_dot(&x.rows, c.rows.clone(), w);
        let att = g.softmax(att);
        let avg = g.rows_combine(&x.rows, c.rows.clone(), att);
        let parts = [
            start,
            end,
            avg,
            l.width.lookup(g, bucket(c.rows.len(), &WIDTH_BOUNDS)),
            l.span_type.lookup(g, c.kind.index()),
            l.end_pos.lookup(g, c.end_pos),
            l.end_dep.lookup(g, c.end_dep),
        ];
        let q = g.concat(&parts);
        g.dropout(q)
    }

    /// Scores every candidate of the segment.
    pub fn forward(&self, g: &mut Graph, x: &SegmentInput) -> Forward {
        let l = &self.layout;
        let k = self.anaphor_rep(g, x);
        let pk = l.proj_k.forward(g, k);
        let mut out = Forward {
            anaphor: k,
            candidates: Vec::new(),
            scores: k,
            mention: Vec::new(),
            fast: Vec::new(),
            slow: Vec::new(),
        };
        let mut scores = vec![g.constant(0.0)];
        for c in &x.candidates {
            let q = self.candidate_rep(g, x, c);
            let sm = l.ffnn_m.forward(g, q);
            let pq = l.proj_q.forward(g, q);
            let sf = g.dot(pk, pq);
            let sim = g.mul(pk, pq);
            let sd = l.sentence_distance.lookup(g, bucket(c.sentence_distance, &SENTENCE_BOUNDS));
            let td = l.token_distance.lookup(g, bucket(c.token_distance, &TOKEN_BOUNDS));
            let pair = g.concat(&[k, q, sd, td, sim]);
            let ss = l.ffnn_c.forward(g, pair);
            let s = g.sum_of(&[sm, sf, ss]);
            out.candidates.push(q);
            out.mention.push(sm);
            out.fast.push(sf);
            out.slow.push(ss);
            scores.push(s);
        }
        out.scores = g.concat(&scores);
        out
    }

    /// Type logits for the anaphor given the chosen candidate, or a zero
    /// placeholder when the dummy won.
    pub fn type_logits(&self, g: &mut Graph, anaphor: Var, antecedent: Option<Var>) -> Var {
        let q = match antecedent {
            Some(q) => q,
            None => g.input(vec![0.0; self.candidate_width()]),
        };
        let x = g.concat(&[anaphor, q]);
        self.layout.type_mlp.forward(g, x)
    }

    /// Eval-mode score components per candidate.
    pub fn score_parts(&self, x: &SegmentInput) -> Vec<ScoreParts> {
        let mut g = Graph::new(&self.params);
        let f = self.forward(&mut g, x);
        (0..x.candidates.len())
            .map(|i| ScoreParts { mention: g.scalar(f.mention[i]), fast: g.scalar(f.fast[i]), slow: g.scalar(f.slow[i]) })
            .collect()
    }

    pub fn predict(&self, x: &SegmentInput) -> DdPrediction {
        let mut g = Graph::new(&self.params);
        let f = self.forward(&mut g, x);
        let choice = choose_antecedent(&g.value(f.scores)[1..]);
        let logits = self.type_logits(&mut g, f.anaphor, choice.map(|i| f.candidates[i]));
        let probs = crate::nn::softmax(g.value(logits));
        let best = (0..3).fold(0, |b, i| if probs[i] > probs[b] { i } else { b });
        DdPrediction {
            anaphor: x.anaphor,
            choice,
            antecedent: choice.map(|i| x.candidates[i].span),
            class: AnaphorClass::from_index(best),
            class_probs: [probs[0], probs[1], probs[2]],
        }
    }

    /// Builds the four loss terms; `None` for a referential segment
    /// without a gold candidate.
    pub fn loss_vars(&self, g: &mut Graph, x: &SegmentInput) -> Option<[Var; 5]> {
        if !x.trainable() {
            return None;
        }
        let f = self.forward(g, x);
        let probs = g.softmax(f.scores);
        let nonref = x.class == AnaphorClass::NonReferential;
        let picked: Vec<Var> = if nonref {
            vec![g.index(probs, 0)]
        } else {
            x.gold.iter().map(|&i| g.index(probs, i + 1)).collect()
        };
        let mass = g.sum_of(&picked);
        let log_mass = g.ln(mass);
        let antecedent = g.scale(log_mass, -1.0);

        let choice = choose_antecedent(&g.value(f.scores)[1..]);
        let logits = self.type_logits(g, f.anaphor, choice.map(|i| f.candidates[i]));
        let mut target = [0.0; 3];
        target[x.class.index()] = 1.0;
        let kind = g.cross_entropy(logits, &target);

        let dummy = g.index(probs, 0);
        let label = g.bce_prob(dummy, if nonref { 1.0 } else { 0.0 });

        let constituent = if x.candidates.is_empty() {
            g.constant(0.0)
        } else {
            let terms: Vec<Var> = x
                .candidates
                .iter()
                .zip(&f.mention)
                .map(|(c, &sm)| g.bce_logits(sm, if c.kind == ConstituentType::Other { 0.0 } else { 1.0 }))
                .collect();
            g.mean_of(&terms)
        };
        let weighted = g.scale(constituent, self.config.constituent_weight);
        let total = g.sum_of(&[antecedent, kind, label, weighted]);
        Some([antecedent, kind, label, constituent, total])
    }

    pub fn loss(&self, x: &SegmentInput) -> Option<DdLoss> {
        let mut g = Graph::new(&self.params);
        let v = self.loss_vars(&mut g, x)?;
        Some(DdLoss {
            antecedent: g.scalar(v[0]),
            kind: g.scalar(v[1]),
            label: g.scalar(v[2]),
            constituent: g.scalar(v[3]),
            total: g.scalar(v[4]),
        })
    }

    /// Eval-mode total loss and its parameter gradients.
    pub fn loss_and_grads(&self, x: &SegmentInput) -> Option<(f64, Grads)> {
        let mut g = Graph::new(&self.params);
        let v = self.loss_vars(&mut g, x)?;
        Some((g.scalar(v[4]), g.backward(v[4])))
    }
}
