//! Coreference scores (MUC, B³, CEAF_e, CoNLL F1), bridging Entity-F1 and
//! mention detection precision/recall.
//!
//! Every metric is first computed as raw numerator/denominator counts so
//! corpus-level scores can be micro-averaged over documents. A zero
//! denominator yields 0, as the reference scorer does.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::corpus::{EntitySet, Link, Partition};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("predicted anaphors differ from gold anaphors ({missing} missing, {extra} extra)")]
    AnaphorSetMismatch { missing: usize, extra: usize },
}

/// Precision and recall as fractions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Prf { precision, recall, f1 }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Unnormalized recall and precision fractions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Counts {
    pub recall_num: f64,
    pub recall_den: f64,
    pub precision_num: f64,
    pub precision_den: f64,
}

impl Counts {
    pub fn prf(&self) -> Prf {
        Prf::from_pr(ratio(self.precision_num, self.precision_den), ratio(self.recall_num, self.recall_den))
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.recall_num += o.recall_num;
        self.recall_den += o.recall_den;
        self.precision_num += o.precision_num;
        self.precision_den += o.precision_den;
    }
}

fn cluster_index<K: Ord + Clone + fmt::Debug>(p: &Partition<K>) -> BTreeMap<&K, usize> {
    let mut idx = BTreeMap::new();
    for (c, cluster) in p.clusters().enumerate() {
        for m in cluster {
            idx.insert(m, c);
        }
    }
    idx
}

/// Link-based recall of `key` against `response`: `|K| - |p(K)|` summed over
/// key clusters, where mentions missing from the response form their own parts.
fn muc_side<K: Ord + Clone + fmt::Debug>(key: &Partition<K>, response: &Partition<K>) -> (f64, f64) {
    let idx = cluster_index(response);
    let (mut num, mut den) = (0usize, 0usize);
    for cluster in key.clusters() {
        let mut parts = BTreeSet::new();
        let mut twinless = 0;
        for m in cluster {
            match idx.get(m) {
                Some(c) => {
                    parts.insert(*c);
                }
                None => twinless += 1,
            }
        }
        num += cluster.len() - (parts.len() + twinless);
        den += cluster.len() - 1;
    }
    (num as f64, den as f64)
}

pub fn muc_counts<K: Ord + Clone + fmt::Debug>(key: &Partition<K>, response: &Partition<K>) -> Counts {
    let (recall_num, recall_den) = muc_side(key, response);
    let (precision_num, precision_den) = muc_side(response, key);
    Counts { recall_num, recall_den, precision_num, precision_den }
}

fn b3_side<K: Ord + Clone + fmt::Debug>(key: &Partition<K>, response: &Partition<K>) -> (f64, f64) {
    let idx = cluster_index(response);
    let (mut num, mut den) = (0.0, 0.0);
    for cluster in key.clusters() {
        let mut overlap: BTreeMap<usize, usize> = BTreeMap::new();
        for m in cluster {
            if let Some(c) = idx.get(m) {
                *overlap.entry(*c).or_default() += 1;
            }
        }
        let sq: usize = overlap.values().map(|n| n * n).sum();
        num += sq as f64 / cluster.len() as f64;
        den += cluster.len() as f64;
    }
    (num, den)
}

pub fn b_cubed_counts<K: Ord + Clone + fmt::Debug>(key: &Partition<K>, response: &Partition<K>) -> Counts {
    let (recall_num, recall_den) = b3_side(key, response);
    let (precision_num, precision_den) = b3_side(response, key);
    Counts { recall_num, recall_den, precision_num, precision_den }
}

/// Entity similarity used by CEAF_e.
pub fn phi4<K: Ord>(a: &BTreeSet<K>, b: &BTreeSet<K>) -> f64 {
    let common = a.intersection(b).count();
    2.0 * common as f64 / (a.len() + b.len()) as f64
}

pub fn ceaf_e_counts<K: Ord + Clone + fmt::Debug>(key: &Partition<K>, response: &Partition<K>) -> Counts {
    let k: Vec<_> = key.clusters().collect();
    let r: Vec<_> = response.clusters().collect();
    let weights: Vec<Vec<f64>> = k.iter().map(|a| r.iter().map(|b| phi4(a, b)).collect()).collect();
    let (total, _) = max_weight_assignment(&weights);
    Counts {
        recall_num: total,
        recall_den: k.len() as f64,
        precision_num: total,
        precision_den: r.len() as f64,
    }
}

/// Link-free key and response have nothing to disagree on and score 1.
fn muc_prf(c: Counts) -> Prf {
    if c.recall_den == 0.0 && c.precision_den == 0.0 {
        Prf::from_pr(1.0, 1.0)
    } else {
        c.prf()
    }
}

pub fn muc<K: Ord + Clone + fmt::Debug>(key: &Partition<K>, response: &Partition<K>) -> Prf {
    muc_prf(muc_counts(key, response))
}

pub fn b_cubed<K: Ord + Clone + fmt::Debug>(key: &Partition<K>, response: &Partition<K>) -> Prf {
    b_cubed_counts(key, response).prf()
}

pub fn ceaf_e<K: Ord + Clone + fmt::Debug>(key: &Partition<K>, response: &Partition<K>) -> Prf {
    ceaf_e_counts(key, response).prf()
}

/// Mean of the MUC, B³ and CEAF_e F1 scores, in percent.
pub fn conll_f1<K: Ord + Clone + fmt::Debug>(key: &Partition<K>, response: &Partition<K>, include_singletons: bool) -> f64 {
    let mut acc = CorefAccumulator::default();
    acc.add(key, response, include_singletons);
    acc.scores().conll
}

/// Maximum-weight assignment between rows and columns of a rectangular
/// weight matrix. Returns the total weight (summed in row order) and the
/// column matched to each row.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let n = weights.len();
    let m = weights.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return (0.0, vec![None; n]);
    }
    if n > m {
        let transposed: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| weights[i][j]).collect()).collect();
        let (_, cols) = max_weight_assignment(&transposed);
        let mut rows = vec![None; n];
        for (j, i) in cols.iter().enumerate() {
            if let Some(i) = i {
                rows[*i] = Some(j);
            }
        }
        return (sum_assignment(weights, &rows), rows);
    }
    // Shortest augmenting paths with potentials, minimizing negated weights.
    let inf = f64::INFINITY;
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            rows[p[j] - 1] = Some(j - 1);
        }
    }
    (sum_assignment(weights, &rows), rows)
}

fn sum_assignment(weights: &[Vec<f64>], rows: &[Option<usize>]) -> f64 {
    rows.iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| weights[i][j]))
        .sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CorefScores {
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_e: Prf,
    /// Percent.
    pub conll: f64,
}

/// Micro-averages the three coreference metrics over documents.
#[derive(Debug, Clone, Default)]
pub struct CorefAccumulator {
    muc: Counts,
    b3: Counts,
    ceaf: Counts,
}

impl CorefAccumulator {
    pub fn add<K: Ord + Clone + fmt::Debug>(&mut self, key: &Partition<K>, response: &Partition<K>, include_singletons: bool) {
        if include_singletons {
            self.add_raw(key, response);
        } else {
            self.add_raw(&key.strip_singletons(), &response.strip_singletons());
        }
    }

    fn add_raw<K: Ord + Clone + fmt::Debug>(&mut self, key: &Partition<K>, response: &Partition<K>) {
        self.muc += muc_counts(key, response);
        self.b3 += b_cubed_counts(key, response);
        self.ceaf += ceaf_e_counts(key, response);
    }

    pub fn scores(&self) -> CorefScores {
        let (muc, b_cubed, ceaf_e) = (muc_prf(self.muc), self.b3.prf(), self.ceaf.prf());
        CorefScores { muc, b_cubed, ceaf_e, conll: 100.0 * (muc.f1 + b_cubed.f1 + ceaf_e.f1) / 3.0 }
    }
}

/// Exact-match mention detection counts.
pub fn mention_counts<K: Ord>(gold: &BTreeSet<K>, predicted: &BTreeSet<K>) -> Counts {
    let hit = gold.intersection(predicted).count() as f64;
    Counts {
        recall_num: hit,
        recall_den: gold.len() as f64,
        precision_num: hit,
        precision_den: predicted.len() as f64,
    }
}

pub fn mention_prf<K: Ord>(gold: &BTreeSet<K>, predicted: &BTreeSet<K>) -> Prf {
    mention_counts(gold, predicted).prf()
}

/// Bridging link counts: a predicted link is correct when its antecedent is
/// a gold antecedent of the same anaphor or coreferent with one.
pub fn entity_counts(gold: &[Link], predicted: &[Link], gold_entities: &EntitySet) -> Result<Counts, MetricsError> {
    let gold_anaphors: BTreeSet<&str> = gold.iter().map(|l| l.anaphor.as_str()).collect();
    let pred_anaphors: BTreeSet<&str> = predicted.iter().map(|l| l.anaphor.as_str()).collect();
    if gold_anaphors != pred_anaphors {
        return Err(MetricsError::AnaphorSetMismatch {
            missing: gold_anaphors.difference(&pred_anaphors).count(),
            extra: pred_anaphors.difference(&gold_anaphors).count(),
        });
    }
    let entity = cluster_index(gold_entities);
    let same_entity = |a: &String, b: &String| a == b || matches!((entity.get(a), entity.get(b)), (Some(x), Some(y)) if x == y);
    let mut correct_anaphors = BTreeSet::new();
    let mut correct_links = 0;
    for p in predicted {
        let ok = gold
            .iter()
            .any(|g| g.anaphor == p.anaphor && same_entity(&g.antecedent, &p.antecedent));
        if ok {
            correct_links += 1;
            correct_anaphors.insert(p.anaphor.as_str());
        }
    }
    Ok(Counts {
        recall_num: correct_anaphors.len() as f64,
        recall_den: gold_anaphors.len() as f64,
        precision_num: correct_links as f64,
        precision_den: predicted.len() as f64,
    })
}

/// Entity-F1 in percent.
pub fn entity_f1(gold: &[Link], predicted: &[Link], gold_entities: &EntitySet) -> Result<f64, MetricsError> {
    Ok(100.0 * entity_counts(gold, predicted, gold_entities)?.prf().f1)
}

/// Corpus-level report, serialized as JSON by the command line tool.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScoreReport {
    pub documents: usize,
    pub with_singletons: CorefScores,
    pub without_singletons: CorefScores,
    pub mentions: Prf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entity_f1: Option<f64>,
}

impl ScoreReport {
    /// Aligned text table; `include_singletons` picks which coreference
    /// block is shown.
    pub fn table(&self, include_singletons: bool) -> String {
        let s = if include_singletons { &self.with_singletons } else { &self.without_singletons };
        let pct = |x: f64| format!("{:>8.2}", 100.0 * x);
        let mut out = String::new();
        out.push_str(&format!("{:<10}{:>8}{:>8}{:>8}\n", "metric", "P", "R", "F1"));
        for (name, prf) in [("MUC", s.muc), ("B3", s.b_cubed), ("CEAF_e", s.ceaf_e), ("mentions", self.mentions)] {
            out.push_str(&format!("{name:<10}{}{}{}\n", pct(prf.precision), pct(prf.recall), pct(prf.f1)));
        }
        out.push_str(&format!("{:<10}{:>24.2}\n", "CoNLL", s.conll));
        if let Some(e) = self.entity_f1 {
            out.push_str(&format!("{:<10}{:>24.2}\n", "Entity-F1", e));
        }
        out
    }
}
