//! Parameters and forward computation of the workspace clusterer.

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::workspace::Workspace;
use super::WcsError;
use crate::checkpoint::{self, Checkpoint};
use crate::corpus::{Document, Span};
use crate::embeddings::EmbeddingStore;
use crate::nn::{bucket, Embedding, Ffnn, Graph, Init, Linear, ParamId, Params, Var};

pub const CHECKPOINT_KIND: &str = "wcs";

/// Lower bucket edges for mention distance and document position.
pub const DISTANCE_BOUNDS: [usize; 10] = [0, 1, 2, 3, 4, 5, 8, 16, 32, 64];
/// Extra distance/position slot reserved for the NEW option.
pub const NEW_SLOT: usize = DISTANCE_BOUNDS.len();

/// Which vector of a mention an encoder reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderInput {
    Head,
    Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub space: String,
    pub input: EncoderInput,
    /// Width of one mention vector; the encoder reads two.
    pub dim: usize,
    pub hidden: usize,
    pub output: usize,
}

impl EncoderSpec {
    pub fn new(space: &str, input: EncoderInput, dim: usize, hidden: usize, output: usize) -> Self {
        EncoderSpec { space: space.into(), input, dim, hidden, output }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WcsConfig {
    pub encoders: Vec<EncoderSpec>,
    /// Width of each distance, position and speaker embedding.
    pub feature_dim: usize,
    pub scorer_hidden: usize,
    /// Speakers beyond this many share one OTHER slot.
    pub max_speakers: usize,
    pub epochs: usize,
    pub lr: f64,
    pub dropout: f64,
    pub teacher_forcing: f64,
    pub eviction: usize,
    pub seed: u64,
}

impl Default for WcsConfig {
    fn default() -> Self {
        use EncoderInput::{Head, Span};
        WcsConfig {
            encoders: vec![
                EncoderSpec::new("bert", Head, 768, 900, 600),
                EncoderSpec::new("bert", Span, 768, 900, 600),
                EncoderSpec::new("numberbatch", Head, 300, 600, 300),
                EncoderSpec::new("glove", Head, 100, 600, 200),
                EncoderSpec::new("glove", Span, 100, 600, 200),
                EncoderSpec::new("bert_mlm", Head, 768, 600, 200),
            ],
            feature_dim: 20,
            scorer_hidden: 256,
            max_speakers: 8,
            epochs: 5,
            lr: 1e-4,
            dropout: 0.3,
            teacher_forcing: 0.3,
            eviction: 100,
            seed: 0,
        }
    }
}

impl WcsConfig {
    /// Takes every encoder's input width from `store`.
    pub fn with_store_dims(mut self, store: &EmbeddingStore) -> Result<Self, WcsError> {
        for e in &mut self.encoders {
            let dim = store.dim(&e.space)?;
            if dim != e.dim {
                log::info!("encoder {}/{:?}: input width {} taken from the store", e.space, e.input, dim);
                e.dim = dim;
            }
        }
        Ok(self)
    }
}

/// A mention with everything the model reads from the document and store.
#[derive(Debug, Clone, PartialEq)]
pub struct MentionInput {
    pub id: String,
    pub span: Span,
    /// One vector per encoder.
    pub vectors: Vec<Vec<f64>>,
    pub speaker: usize,
    pub entity: Option<String>,
    pub referring: bool,
}

/// Graph handles for one side of a pair.
#[derive(Debug, Clone)]
pub struct Side {
    vectors: Vec<Var>,
    /// Mention ordinal; `None` for the NEW option.
    ordinal: Option<usize>,
    speaker: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    encoders: Vec<Ffnn>,
    phantom: Vec<ParamId>,
    distance: Embedding,
    position: Embedding,
    speaker: Embedding,
    scorer: Ffnn,
    referring: Linear,
}

/// Graph outputs of one clustering step.
#[derive(Debug, Clone, Copy)]
pub struct StepVars {
    /// Active clusters in workspace order, then NEW.
    pub logits: Var,
    pub probs: Var,
    pub referring_logit: Var,
}

#[derive(Debug, Clone)]
pub struct WcsModel {
    pub config: WcsConfig,
    pub params: Params,
    layout: Layout,
}

impl WcsModel {
    /// Fresh model with parameters drawn from `config.seed`.
    pub fn new(config: WcsConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = Params::new();
        let fd = config.feature_dim;
        let mut encoders = Vec::new();
        let mut phantom = Vec::new();
        for (k, e) in config.encoders.iter().enumerate() {
            let name = format!("enc{k}.{}.{:?}", e.space, e.input).to_lowercase();
            encoders.push(Ffnn::new(&mut params, &name, &[2 * e.dim, e.hidden, e.output], true, &mut rng));
            phantom.push(params.add(&format!("{name}.new"), 1, e.dim, Init::Uniform(0.1), &mut rng));
        }
        let distance = Embedding::new(&mut params, "distance", NEW_SLOT + 1, fd, &mut rng);
        let position = Embedding::new(&mut params, "position", NEW_SLOT + 1, fd, &mut rng);
        let speaker = Embedding::new(&mut params, "speaker", config.max_speakers + 1, fd, &mut rng);
        let width = Self::width_of(&config);
        let scorer = Ffnn::new(&mut params, "scorer", &[width, config.scorer_hidden, 1], false, &mut rng);
        let referring = Linear::new(&mut params, "referring", width, 1, &mut rng);
        let layout = Layout { encoders, phantom, distance, position, speaker, scorer, referring };
        WcsModel { config, params, layout }
    }

    fn width_of(config: &WcsConfig) -> usize {
        config.encoders.iter().map(|e| e.output).sum::<usize>() + 5 * config.feature_dim
    }

    /// Width of an encoded pair.
    pub fn pair_width(&self) -> usize {
        Self::width_of(&self.config)
    }

    pub fn save(&self, path: &Path) -> Result<(), WcsError> {
        Ok(checkpoint::save(path, CHECKPOINT_KIND, &self.config, &self.params)?)
    }

    pub fn load(path: &Path) -> Result<Self, WcsError> {
        Self::from_checkpoint(&checkpoint::load(path)?)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, WcsError> {
        ck.expect_kind(CHECKPOINT_KIND)?;
        let config: WcsConfig = serde_json::from_value(ck.config.clone())
            .map_err(|e| WcsError::Config(e.to_string()))?;
        let mut model = WcsModel::new(config);
        ck.restore(&mut model.params)?;
        Ok(model)
    }

    /// Collects encoder inputs for every mention of `doc`, in span order.
    pub fn prepare(&self, doc: &Document, store: &EmbeddingStore) -> Result<Vec<MentionInput>, WcsError> {
        store.check_document(doc)?;
        let mut speakers: HashMap<&str, usize> = HashMap::new();
        for t in &doc.tokens {
            let next = speakers.len();
            speakers.entry(t.speaker.as_str()).or_insert(next);
        }
        let mut mentions: Vec<_> = doc.mentions.iter().collect();
        mentions.sort_by(|a, b| (a.span, &a.id).cmp(&(b.span, &b.id)));
        mentions
            .into_iter()
            .map(|m| {
                let vectors = self
                    .config
                    .encoders
                    .iter()
                    .map(|e| {
                        let v = match e.input {
                            EncoderInput::Span => store.span_vector_or_fallback(&e.space, m.span)?,
                            EncoderInput::Head => {
                                let head = Span::single(store.head_token(m.span));
                                store.span_vector_or_fallback(&e.space, head)?
                            }
                        };
                        if v.len() != e.dim {
                            return Err(WcsError::DimMismatch { space: e.space.clone(), expected: e.dim, found: v.len() });
                        }
                        Ok(v)
                    })
                    .collect::<Result<Vec<_>, WcsError>>()?;
                let speaker = speakers[doc.tokens[m.span.start].speaker.as_str()].min(self.config.max_speakers);
                Ok(MentionInput {
                    id: m.id.clone(),
                    span: m.span,
                    vectors,
                    speaker,
                    entity: m.gold_entity.clone(),
                    referring: m.is_referring(),
                })
            })
            .collect()
    }

    pub fn side(&self, g: &mut Graph, m: &MentionInput, ordinal: usize) -> Side {
        Side {
            vectors: m.vectors.iter().map(|v| g.input(v.clone())).collect(),
            ordinal: Some(ordinal),
            speaker: m.speaker,
        }
    }

    /// The learned stand-in member of the NEW option.
    pub fn new_side(&self, g: &mut Graph) -> Side {
        Side {
            vectors: self.layout.phantom.iter().map(|p| g.param(*p)).collect(),
            ordinal: None,
            speaker: self.config.max_speakers,
        }
    }

    /// Encoder outputs followed by distance, both positions and both
    /// speakers. `candidate` must be a real mention.
    pub fn encode_pair(&self, g: &mut Graph, candidate: &Side, member: &Side) -> Var {
        let l = &self.layout;
        let cand_ord = candidate.ordinal.expect("candidate is a mention");
        let mut parts = Vec::with_capacity(l.encoders.len() + 5);
        for (k, enc) in l.encoders.iter().enumerate() {
            let x = g.concat(&[candidate.vectors[k], member.vectors[k]]);
            parts.push(enc.forward(g, x));
        }
        let (dist, pos) = match member.ordinal {
            Some(o) => (bucket(cand_ord.abs_diff(o), &DISTANCE_BOUNDS), bucket(o, &DISTANCE_BOUNDS)),
            None => (NEW_SLOT, NEW_SLOT),
        };
        parts.push(l.distance.lookup(g, dist));
        parts.push(l.position.lookup(g, bucket(cand_ord, &DISTANCE_BOUNDS)));
        parts.push(l.position.lookup(g, pos));
        parts.push(l.speaker.lookup(g, candidate.speaker));
        parts.push(l.speaker.lookup(g, member.speaker));
        g.concat(&parts)
    }

    pub fn pair_logit(&self, g: &mut Graph, pair: Var) -> Var {
        self.layout.scorer.forward(g, pair)
    }

    pub fn referring_logit(&self, g: &mut Graph, candidate: &Side) -> Var {
        let pair = self.encode_pair(g, candidate, candidate);
        self.layout.referring.forward(g, pair)
    }

    /// Scores mention `t` against every active cluster (mean of member pair
    /// logits) and NEW. `side` must yield the graph side of any mention.
    pub fn step(
        &self,
        g: &mut Graph,
        ws: &Workspace,
        t: usize,
        new: &Side,
        side: &mut dyn FnMut(&mut Graph, usize) -> Side,
    ) -> StepVars {
        let cand = side(g, t);
        let mut logits = Vec::with_capacity(ws.active.len() + 1);
        for c in &ws.active {
            let member_logits: Vec<Var> = c
                .members
                .iter()
                .map(|m| {
                    let s = side(g, *m);
                    let pair = self.encode_pair(g, &cand, &s);
                    self.pair_logit(g, pair)
                })
                .collect();
            logits.push(g.mean_of(&member_logits));
        }
        let pair = self.encode_pair(g, &cand, new);
        logits.push(self.pair_logit(g, pair));
        let logits = g.concat(&logits);
        let probs = g.softmax(logits);
        let referring_logit = self.referring_logit(g, &cand);
        StepVars { logits, probs, referring_logit }
    }

    /// Eval-mode distribution of mention `t` over the active clusters and NEW.
    pub fn score_candidate(&self, inputs: &[MentionInput], ws: &Workspace, t: usize) -> Vec<f64> {
        let mut g = Graph::new(&self.params);
        let new = self.new_side(&mut g);
        let mut side = |g: &mut Graph, m: usize| self.side(g, &inputs[m], m);
        let vars = self.step(&mut g, ws, t, &new, &mut side);
        g.value(vars.probs).to_vec()
    }
}
