//! Span encoder, fine pair scorer and gated higher-order refinement.

use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BridgingError;
use crate::checkpoint::{self, Checkpoint};
use crate::dd::model::TOKEN_BOUNDS;
use crate::nn::{bucket, ConstRows, Embedding, Ffnn, Graph, Grads, Init, Linear, ParamId, Params, Var};

pub const CHECKPOINT_KIND: &str = "bridging";

/// Lower edges of the span-width buckets (in subtokens).
pub const WIDTH_BOUNDS: [usize; 10] = [1, 2, 3, 4, 5, 8, 16, 32, 64, 128];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BridgingConfig {
    pub space: String,
    /// Input vector width; replaced by the store's width when they differ.
    pub dim: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    pub depth: usize,
    pub epochs: usize,
    pub lr: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for BridgingConfig {
    fn default() -> Self {
        BridgingConfig {
            space: "bert".into(),
            dim: 768,
            feature_dim: 20,
            hidden: 1024,
            depth: 2,
            epochs: 5,
            lr: 3e-3,
            dropout: 0.3,
            seed: 0,
        }
    }
}

/// A gold mention as the encoder sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanInput {
    pub id: String,
    /// Rows of the document matrix covered by the mention.
    pub rows: Range<usize>,
    pub speaker: usize,
}

/// One anaphor with its candidate antecedents.
#[derive(Debug, Clone)]
pub struct InstanceInput {
    pub doc_id: String,
    /// Subtoken vectors of the whole document.
    pub rows: ConstRows,
    pub anaphor: SpanInput,
    /// In document order.
    pub candidates: Vec<SpanInput>,
    /// Index of the gold antecedent, when known.
    pub gold: Option<usize>,
}

#[derive(Debug, Clone)]
struct Layout {
    attention: ParamId,
    width: Embedding,
    distance: Embedding,
    same_speaker: Embedding,
    scorer: Ffnn,
    gate: Linear,
}

#[derive(Debug, Clone)]
pub struct BridgingModel {
    pub config: BridgingConfig,
    pub params: Params,
    layout: Layout,
}

/// Index of the best candidate; equal maxima go to the later (nearer) one.
pub fn choose(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.map_or(true, |b| *s >= scores[b]) && !s.is_nan() {
            best = Some(i);
        }
    }
    best
}

impl BridgingModel {
    pub fn new(config: BridgingConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let p = &mut Params::new();
        let fd = config.feature_dim;
        let attention = p.add("attention", 1, config.dim, Init::Uniform(0.1), &mut rng);
        let width = Embedding::new(p, "width", WIDTH_BOUNDS.len(), fd, &mut rng);
        let distance = Embedding::new(p, "distance", TOKEN_BOUNDS.len(), fd, &mut rng);
        let same_speaker = Embedding::new(p, "same_speaker", 2, fd, &mut rng);
        let w = Self::span_width_of(&config);
        let h = config.hidden;
        let scorer = Ffnn::new(p, "scorer", &[3 * w + 2 * fd, h, h, 1], false, &mut rng);
        let gate = Linear::new(p, "gate", 2 * w, w, &mut rng);
        let layout = Layout { attention, width, distance, same_speaker, scorer, gate };
        BridgingModel { config, params: std::mem::take(p), layout }
    }

    fn span_width_of(config: &BridgingConfig) -> usize {
        3 * config.dim + config.feature_dim
    }

    /// Width of a span representation.
    pub fn span_width(&self) -> usize {
        Self::span_width_of(&self.config)
    }

    pub fn save(&self, path: &Path) -> Result<(), BridgingError> {
        Ok(checkpoint::save(path, CHECKPOINT_KIND, &self.config, &self.params)?)
    }

    pub fn load(path: &Path) -> Result<Self, BridgingError> {
        Self::from_checkpoint(&checkpoint::load(path)?)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, BridgingError> {
        ck.expect_kind(CHECKPOINT_KIND)?;
        let config: BridgingConfig =
            serde_json::from_value(ck.config.clone()).map_err(|e| BridgingError::Config(e.to_string()))?;
        let mut model = BridgingModel::new(config);
        ck.restore(&mut model.params)?;
        Ok(model)
    }

    /// Start row, end row, attention-weighted average and width embedding.
    pub fn span_rep(&self, g: &mut Graph, rows: &ConstRows, s: &SpanInput) -> Var {
        let l = &self.layout;
        let start = g.input(rows.row(s.rows.start).to_vec());
        let end = g.input(rows.row(s.rows.end - 1).to_vec());
        let w = g.param(l.attention);
        let att = g.rows_dot(rows, s.rows.clone(), w);
        let att = g.softmax(att);
        let avg = g.rows_combine(rows, s.rows.clone(), att);
        let width = l.width.lookup(g, bucket(s.rows.len(), &WIDTH_BOUNDS));
        let rep = g.concat(&[start, end, avg, width]);
        g.dropout(rep)
    }

    /// Fine score of one pair.
    pub fn fine_score(&self, g: &mut Graph, a: Var, c: Var, anaphor: &SpanInput, candidate: &SpanInput) -> Var {
        let l = &self.layout;
        let prod = g.mul(a, c);
        let distance = anaphor.rows.start.abs_diff(candidate.rows.start);
        let d = l.distance.lookup(g, bucket(distance, &TOKEN_BOUNDS));
        let s = l.same_speaker.lookup(g, (anaphor.speaker == candidate.speaker) as usize);
        let x = g.concat(&[a, c, prod, d, s]);
        l.scorer.forward(g, x)
    }

    fn scores_for(&self, g: &mut Graph, a: Var, cands: &[Var], x: &InstanceInput) -> Var {
        let s: Vec<Var> = cands
            .iter()
            .zip(&x.candidates)
            .map(|(&c, ci)| self.fine_score(g, a, c, &x.anaphor, ci))
            .collect();
        g.concat(&s)
    }

    /// `depth` rounds of gating the expected antecedent into the anaphor:
    /// `a <- (1 - f) * a + f * e`, `f = sigmoid(W [a; e] + b)`.
    pub fn refine(&self, g: &mut Graph, a: Var, cands: &[Var], x: &InstanceInput, depth: usize) -> Var {
        let mut a = a;
        for _ in 0..depth {
            let s = self.scores_for(g, a, cands, x);
            let alpha = g.softmax(s);
            let e = g.weighted_sum(alpha, cands);
            let ae = g.concat(&[a, e]);
            let z = self.layout.gate.forward(g, ae);
            let f = g.sigmoid(z);
            let diff = g.sub(e, a);
            let step = g.mul(f, diff);
            a = g.add(a, step);
        }
        a
    }

    /// Final candidate scores after refinement; `None` without candidates.
    pub fn forward(&self, g: &mut Graph, x: &InstanceInput) -> Option<Var> {
        if x.candidates.is_empty() {
            return None;
        }
        let a = self.span_rep(g, &x.rows, &x.anaphor);
        let cands: Vec<Var> = x.candidates.iter().map(|c| self.span_rep(g, &x.rows, c)).collect();
        let a = self.refine(g, a, &cands, x, self.config.depth);
        Some(self.scores_for(g, a, &cands, x))
    }

    pub fn scores(&self, x: &InstanceInput) -> Vec<f64> {
        let mut g = Graph::new(&self.params);
        match self.forward(&mut g, x) {
            Some(s) => g.value(s).to_vec(),
            None => Vec::new(),
        }
    }

    /// Eval-mode anaphor representation after `depth` refinement rounds.
    pub fn refined_anaphor(&self, x: &InstanceInput, depth: usize) -> Vec<f64> {
        let mut g = Graph::new(&self.params);
        let a = self.span_rep(&mut g, &x.rows, &x.anaphor);
        let cands: Vec<Var> = x.candidates.iter().map(|c| self.span_rep(&mut g, &x.rows, c)).collect();
        let r = self.refine(&mut g, a, &cands, x, depth);
        g.value(r).to_vec()
    }

    /// Predicted antecedent index.
    pub fn resolve(&self, x: &InstanceInput) -> Option<usize> {
        choose(&self.scores(x))
    }

    /// Cross-entropy of the candidate distribution against the gold index.
    pub fn loss_var(&self, g: &mut Graph, x: &InstanceInput) -> Option<Var> {
        let gold = x.gold?;
        let s = self.forward(g, x)?;
        let mut target = vec![0.0; x.candidates.len()];
        target[gold] = 1.0;
        Some(g.cross_entropy(s, &target))
    }

    pub fn loss(&self, x: &InstanceInput) -> Option<f64> {
        let mut g = Graph::new(&self.params);
        let v = self.loss_var(&mut g, x)?;
        Some(g.scalar(v))
    }

    pub fn loss_and_grads(&self, x: &InstanceInput) -> Option<(f64, Grads)> {
        let mut g = Graph::new(&self.params);
        let v = self.loss_var(&mut g, x)?;
        Some((g.scalar(v), g.backward(v)))
    }
}
