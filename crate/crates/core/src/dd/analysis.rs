//! Error analysis of predicted discourse-deixis antecedents.

use std::collections::BTreeMap;

use super::segments::AnaphorClass;
use crate::corpus::{Document, Span};
use crate::lexicon;

/// A span counts as split when any of its tokens but the last ends a sentence.
pub fn split_heuristic(doc: &Document, span: Span) -> bool {
    (span.start..span.end).any(|i| lexicon::is_sentence_final(&doc.tokens[i].surface))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Border {
    LeftWrong,
    RightWrong,
    BothWrong,
    BothCorrect,
}

impl Border {
    pub const ALL: [Border; 4] = [Border::LeftWrong, Border::RightWrong, Border::BothWrong, Border::BothCorrect];

    /// Compares `predicted` with the extent of the gold antecedent.
    pub fn of(predicted: Span, gold: Span) -> Self {
        match (predicted.start == gold.start, predicted.end == gold.end) {
            (false, true) => Border::LeftWrong,
            (true, false) => Border::RightWrong,
            (false, false) => Border::BothWrong,
            (true, true) => Border::BothCorrect,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Border::LeftWrong => "left_wrong",
            Border::RightWrong => "right_wrong",
            Border::BothWrong => "both_wrong",
            Border::BothCorrect => "both_correct",
        }
    }
}

/// One gold discourse-deixis anaphor with the resolver's output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorCase {
    pub gold_split: bool,
    /// `None` for an empty prediction; otherwise the prediction's split
    /// status and border agreement with the gold extent.
    pub predicted: Option<(bool, Border)>,
    pub predicted_class: AnaphorClass,
}

impl ErrorCase {
    /// `gold` holds every span of the gold antecedent; several spans make
    /// it split, as does a single span passing [`split_heuristic`].
    pub fn new(doc: &Document, gold: &[Span], predicted: Option<Span>, predicted_class: AnaphorClass) -> Self {
        let extent = Span::new(
            gold.iter().map(|s| s.start).min().unwrap_or(0),
            gold.iter().map(|s| s.end).max().unwrap_or(0),
        );
        let gold_split = gold.len() > 1 || (!gold.is_empty() && split_heuristic(doc, extent));
        ErrorCase {
            gold_split,
            predicted: predicted.map(|p| (split_heuristic(doc, p), Border::of(p, extent))),
            predicted_class,
        }
    }
}

type Row = Option<(bool, Border)>;

/// Counts indexed by prediction row and (gold split, predicted type) column.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrorReport {
    cells: BTreeMap<(Row, bool, AnaphorClass), usize>,
}

const TYPE_ORDER: [AnaphorClass; 3] = [AnaphorClass::NonReferential, AnaphorClass::DiscourseDeixis, AnaphorClass::Identity];

impl ErrorReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, case: &ErrorCase) {
        *self.cells.entry((case.predicted, case.gold_split, case.predicted_class)).or_default() += 1;
    }

    pub fn count(&self, row: Row, gold_split: bool, class: AnaphorClass) -> usize {
        self.cells.get(&(row, gold_split, class)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.cells.values().sum()
    }

    fn rows() -> Vec<(String, Row)> {
        let mut rows = Vec::new();
        for split in [false, true] {
            for b in Border::ALL {
                let prefix = if split { "split" } else { "not_split" };
                rows.push((format!("{prefix},{}", b.name()), Some((split, b))));
            }
        }
        rows.push(("empty,".to_string(), None));
        rows
    }

    /// The grid as CSV: one row per prediction outcome, one column per gold
    /// split status and predicted type.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("prediction,border");
        for gold in ["gold_not_split", "gold_split"] {
            for c in TYPE_ORDER {
                out.push_str(&format!(",{gold}_{}", c.name().to_lowercase()));
            }
        }
        out.push('\n');
        for (label, row) in Self::rows() {
            out.push_str(&label);
            for gold in [false, true] {
                for c in TYPE_ORDER {
                    out.push_str(&format!(",{}", self.count(row, gold, c)));
                }
            }
            out.push('\n');
        }
        out
    }
}
