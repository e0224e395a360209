//! Gold targets and scalar forms of the three training losses.

use super::workspace::Workspace;

/// Gold distribution over the active clusters followed by NEW. A cluster's
/// raw score is the share of its members that belong to the candidate's
/// gold entity; NEW scores 1 exactly when no cluster scores above 0.
/// `entity[m]` is the gold entity of mention `m`, if any.
pub fn gold_target_distribution<E: PartialEq>(candidate: usize, ws: &Workspace, entity: &[Option<E>]) -> Vec<f64> {
    let mine = &entity[candidate];
    let mut raw: Vec<f64> = ws
        .active
        .iter()
        .map(|c| {
            let mates = match mine {
                Some(e) => c.members.iter().filter(|m| entity[**m].as_ref() == Some(e)).count(),
                None => 0,
            };
            mates as f64 / c.members.len() as f64
        })
        .collect();
    let any = raw.iter().any(|r| *r > 0.0);
    raw.push(if any { 0.0 } else { 1.0 });
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| r / total).collect()
}

/// Cross-entropy of `predicted` probabilities against `target`.
pub fn clustering_loss(predicted: &[f64], target: &[f64]) -> f64 {
    predicted
        .iter()
        .zip(target)
        .filter(|(_, t)| **t > 0.0)
        .map(|(p, t)| -t * p.ln())
        .sum()
}

/// Binary cross-entropy of a referring probability.
pub fn referring_loss(probability: f64, referring: bool) -> f64 {
    binary_cross_entropy(probability, if referring { 1.0 } else { 0.0 })
}

pub fn binary_cross_entropy(p: f64, y: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Mean binary cross-entropy between co-cluster probabilities and the gold
/// co-cluster indicator over all unordered mention pairs. `soft[m]` maps
/// cluster ids to the probability that mention `m` belongs to them.
pub fn coherence_loss(soft: &[Vec<(usize, f64)>], same_gold: impl Fn(usize, usize) -> bool) -> f64 {
    let n = soft.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let p: f64 = soft[i]
                .iter()
                .map(|(c, pi)| pi * soft[j].iter().find(|(d, _)| d == c).map_or(0.0, |(_, pj)| *pj))
                .sum();
            total += binary_cross_entropy(p, if same_gold(i, j) { 1.0 } else { 0.0 });
        }
    }
    total / (n * (n - 1) / 2) as f64
}
