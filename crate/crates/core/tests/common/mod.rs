//! Helpers shared by the integration tests and the acceptance target:
//! a finite-difference gradient checker, brute-force coreference metrics
//! and set-partition enumeration.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use anaphora::corpus::Partition;
use anaphora::nn::{Grads, Params};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Default)]
pub struct FdReport {
    pub checked: usize,
    /// Entries skipped because a ReLU changes state within the step.
    pub kinks: usize,
    pub worst: f64,
    pub failures: Vec<String>,
    /// Tensors with at least one nonzero analytic gradient entry.
    pub touched: BTreeSet<String>,
    /// Tensors with at least one entry compared.
    pub covered: BTreeSet<String>,
}

impl FdReport {
    pub fn merge(&mut self, o: FdReport) {
        self.checked += o.checked;
        self.kinks += o.kinks;
        self.worst = self.worst.max(o.worst);
        self.failures.extend(o.failures);
        self.touched.extend(o.touched);
        self.covered.extend(o.covered);
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central differences against `analytic` on up to `per_tensor` entries of
/// every tensor, half of them drawn from entries with a nonzero gradient.
pub fn check_gradients(
    params: &Params,
    analytic: &Grads,
    loss: impl Fn(&Params) -> f64,
    per_tensor: usize,
    seed: u64,
) -> FdReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = params.clone();
    let f0 = loss(&p);
    let mut report = FdReport::default();
    for id in params.ids().collect::<Vec<_>>() {
        let name = params.get(id).name.clone();
        let n = params.get(id).data.len();
        let grad: Vec<f64> = analytic.get(id).map_or(vec![0.0; n], <[f64]>::to_vec);
        let mut nonzero: Vec<usize> = (0..n).filter(|&i| grad[i] != 0.0).collect();
        if !nonzero.is_empty() {
            report.touched.insert(name.clone());
        }
        nonzero.shuffle(&mut rng);
        let mut picked: BTreeSet<usize> = nonzero.into_iter().take(per_tensor / 2 + per_tensor % 2).collect();
        while picked.len() < per_tensor.min(n) {
            picked.insert(rng.gen_range(0..n));
        }
        for i in picked {
            let orig = p.get(id).data[i];
            p.get_mut(id).data[i] = orig + FD_STEP;
            let up = loss(&p);
            p.get_mut(id).data[i] = orig - FD_STEP;
            let down = loss(&p);
            p.get_mut(id).data[i] = orig;
            let forward = (up - f0) / FD_STEP;
            let backward = (f0 - down) / FD_STEP;
            let numeric = (up - down) / (2.0 * FD_STEP);
            if (forward - backward).abs() > 1e-2 * forward.abs().max(backward.abs()).max(1e-3) {
                report.kinks += 1;
                continue;
            }
            let mut err = relative_error(grad[i], numeric);
            if err >= FD_TOLERANCE {
                // A ReLU input within one step of zero bends the difference
                // without showing up as forward/backward asymmetry.
                let h = FD_STEP / 10.0;
                p.get_mut(id).data[i] = orig + h;
                let up = loss(&p);
                p.get_mut(id).data[i] = orig - h;
                let down = loss(&p);
                p.get_mut(id).data[i] = orig;
                let fine = relative_error(grad[i], (up - down) / (2.0 * h));
                if fine < FD_TOLERANCE * 1e-2 {
                    report.kinks += 1;
                    err = fine;
                }
            }
            report.checked += 1;
            report.covered.insert(name.clone());
            report.worst = report.worst.max(err);
            if err >= FD_TOLERANCE {
                report.failures.push(format!("{name}[{i}]: analytic {} numeric {numeric}", grad[i]));
            }
        }
    }
    report
}

pub type Clusters = Vec<Vec<u32>>;

pub fn partition(c: &Clusters) -> Partition<u32> {
    Partition::new(c.iter().cloned()).expect("disjoint clusters")
}

/// A random partition of a random subset of `0..universe`.
pub fn random_clusters(rng: &mut impl Rng, universe: u32) -> Clusters {
    let mut by: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for m in 0..universe {
        if rng.gen_bool(0.8) {
            by.entry(rng.gen_range(0..universe as usize)).or_default().push(m);
        }
    }
    by.into_values().collect()
}

fn cluster_of(c: &Clusters, m: u32) -> Option<usize> {
    c.iter().position(|k| k.contains(&m))
}

fn safe(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// (recall, precision, f1) by the link-counting definition: each key
/// cluster needs `|K| - 1` links; the response supplies as many as the
/// graph of same-response-cluster pairs inside K has spanning edges.
pub fn muc_oracle(key: &Clusters, response: &Clusters) -> (f64, f64, f64) {
    fn side(key: &Clusters, response: &Clusters) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for k in key {
            let mut comp: Vec<usize> = (0..k.len()).collect();
            fn root(c: &mut Vec<usize>, x: usize) -> usize {
                if c[x] == x {
                    x
                } else {
                    let r = root(c, c[x]);
                    c[x] = r;
                    r
                }
            }
            let mut edges = 0;
            for i in 0..k.len() {
                for j in i + 1..k.len() {
                    let (a, b) = (cluster_of(response, k[i]), cluster_of(response, k[j]));
                    if a.is_some() && a == b {
                        let (ri, rj) = (root(&mut comp, i), root(&mut comp, j));
                        if ri != rj {
                            comp[ri] = rj;
                            edges += 1;
                        }
                    }
                }
            }
            num += edges as f64;
            den += (k.len() - 1) as f64;
        }
        safe(num, den)
    }
    if key.iter().chain(response).all(|c| c.len() < 2) {
        return (1.0, 1.0, 1.0);
    }
    let r = side(key, response);
    let p = side(response, key);
    (r, p, f1(p, r))
}

pub fn b3_oracle(key: &Clusters, response: &Clusters) -> (f64, f64, f64) {
    fn side(key: &Clusters, response: &Clusters) -> f64 {
        let mentions: Vec<u32> = key.iter().flatten().copied().collect();
        let mut sum = 0.0;
        for &m in &mentions {
            let k = &key[cluster_of(key, m).unwrap()];
            let overlap = match cluster_of(response, m) {
                Some(r) => k.iter().filter(|x| response[r].contains(x)).count(),
                None => 0,
            };
            sum += overlap as f64 / k.len() as f64;
        }
        safe(sum, mentions.len() as f64)
    }
    let r = side(key, response);
    let p = side(response, key);
    (r, p, f1(p, r))
}

fn phi4(a: &[u32], b: &[u32]) -> f64 {
    let common = a.iter().filter(|x| b.contains(x)).count();
    2.0 * common as f64 / (a.len() + b.len()) as f64
}

/// Best total similarity over every partial one-to-one map from key
/// clusters to response clusters.
pub fn best_alignment(key: &Clusters, response: &Clusters) -> f64 {
    fn go(i: usize, key: &Clusters, response: &Clusters, used: &mut Vec<bool>) -> f64 {
        if i == key.len() {
            return 0.0;
        }
        let mut best = go(i + 1, key, response, used);
        for j in 0..response.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(phi4(&key[i], &response[j]) + go(i + 1, key, response, used));
                used[j] = false;
            }
        }
        best
    }
    go(0, key, response, &mut vec![false; response.len()])
}

pub fn ceaf_e_oracle(key: &Clusters, response: &Clusters) -> (f64, f64, f64) {
    let total = best_alignment(key, response);
    let r = safe(total, key.len() as f64);
    let p = safe(total, response.len() as f64);
    (r, p, f1(p, r))
}

pub fn conll_oracle(key: &Clusters, response: &Clusters) -> f64 {
    100.0 * (muc_oracle(key, response).2 + b3_oracle(key, response).2 + ceaf_e_oracle(key, response).2) / 3.0
}

/// Every partition of `items`, by restricted growth strings.
pub fn set_partitions(items: &[u32]) -> Vec<Clusters> {
    let n = items.len();
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    loop {
        let blocks = rgs.iter().max().map_or(0, |m| m + 1);
        let mut c: Clusters = vec![Vec::new(); blocks];
        for (i, b) in rgs.iter().enumerate() {
            c[*b].push(items[i]);
        }
        out.push(c);
        // Next string: bump the last position that may grow.
        let mut i = n;
        loop {
            if i <= 1 {
                return out;
            }
            i -= 1;
            let limit = rgs[..i].iter().max().copied().unwrap_or(0) + 1;
            if rgs[i] < limit {
                rgs[i] += 1;
                rgs[i + 1..].iter_mut().for_each(|x| *x = 0);
                break;
            }
        }
    }
}

/// Partitions of every subset of `0..n`.
pub fn all_partial_partitions(n: u32) -> Vec<Clusters> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let items: Vec<u32> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if items.is_empty() {
            out.push(Vec::new());
        } else {
            out.extend(set_partitions(&items));
        }
    }
    out
}

/// Moves zero-initialised biases off zero. With all-zero biases a layer fed
/// by a dead ReLU layer sits exactly on the next ReLU's kink.
pub fn jitter_biases(params: &mut Params, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in params.tensors_mut() {
        if t.name.ends_with(".b") {
            t.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
        }
    }
}

/// Documents with the given number of non-referential, identity and
/// discourse-deixis segments, 40 segments per document.
pub fn class_mix_corpus(nonref: usize, identity: usize, deixis: usize) -> Vec<anaphora::corpus::Document> {
    let mut units: Vec<Vec<(String, String)>> = Vec::new();
    let mut k = 0;
    let unit = |lines: Vec<(&str, String)>| lines.into_iter().map(|(a, b)| (a.to_string(), b)).collect::<Vec<_>>();
    for _ in 0..nonref {
        units.push(unit(vec![("A", "well it rains .".into())]));
    }
    for _ in 0..identity {
        k += 1;
        units.push(unit(vec![("A", format!("[the box]e{k} is here .")), ("B", format!("[it]e{k} is red ."))]));
    }
    for _ in 0..deixis {
        k += 1;
        units.push(unit(vec![("A", format!("[we left early .]@v{k}")), ("B", format!("[that]>v{k} was odd ."))]));
    }
    units
        .chunks(40)
        .enumerate()
        .map(|(i, chunk)| {
            let lines: Vec<(&str, &str)> = chunk.iter().flatten().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            anaphora::toy::parse_marked(&format!("mix{i}"), &lines)
        })
        .collect()
}

/// Recounts the subtokens of every segment of `doc`: one segment per
/// anaphor candidate, within `limit`, ending with the anaphor's sentence
/// and starting on a sentence boundary no later than necessary. Returns
/// the number of segments.
pub fn check_segments(doc: &anaphora::corpus::Document, limit: usize) -> Result<usize, String> {
    use anaphora::dd::{build_segments, candidate_anaphors};
    let sentences = doc.sentences();
    let sentence_of = doc.sentence_index();
    let count = |a: usize, b: usize| (a..=b).map(|i| doc.tokens[i].subtoken_count).sum::<usize>();
    let segments = build_segments(doc, limit);
    let anaphors: Vec<usize> = segments.iter().map(|s| s.anaphor).collect();
    if anaphors != candidate_anaphors(doc) {
        return Err(format!("{}: segments do not match the anaphor candidates", doc.id));
    }
    for s in &segments {
        let w = s.tokens;
        let fail = |what: &str| Err(format!("{}: segment of anaphor {}: {what}", doc.id, s.anaphor));
        if !w.contains(s.anaphor) {
            return fail("anaphor outside the window");
        }
        if s.subtokens.len() != count(w.start, w.end) {
            return fail("subtoken range disagrees with the recount");
        }
        if s.subtokens.len() > limit {
            return fail("over the subtoken limit");
        }
        let own = sentences[sentence_of[s.anaphor]];
        if count(own.start, own.end) > limit {
            // Clipped: stays inside the anaphor's sentence.
            if !own.contains_span(&w) {
                return fail("clipped window leaves the sentence");
            }
            continue;
        }
        if w.end != own.end {
            return fail("window does not end with the anaphor's sentence");
        }
        let first = sentence_of[w.start];
        if sentences[first].start != w.start {
            return fail("left boundary splits a sentence");
        }
        if first > 0 && count(sentences[first - 1].start, w.end) <= limit {
            return fail("one more sentence would fit");
        }
    }
    Ok(segments.len())
}
