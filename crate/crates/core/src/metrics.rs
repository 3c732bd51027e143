//! Confusion matrices, per-class precision/recall/F1 and the micro, macro and
//! weighted F1 aggregates, plus fixed-width and CSV table rendering.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CanonicalLabel;

const K: usize = CanonicalLabel::COUNT;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{preds} predictions but {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("nothing to evaluate")]
    Empty,
}

/// `counts[gold][pred]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; K]; K]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn counts(&self) -> &[[u64; K]; K] {
        &self.counts
    }

    pub fn get(&self, gold: CanonicalLabel, pred: CanonicalLabel) -> u64 {
        self.counts[gold.code()][pred.code()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn scores(&self) -> ScoreReport {
        f1_scores(self)
    }
}

pub fn confusion(preds: &[CanonicalLabel], golds: &[CanonicalLabel]) -> Result<ConfusionMatrix, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (p, g) in preds.iter().zip(golds) {
        cm.counts[g.code()][p.code()] += 1;
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// Indexed by label code.
    pub per_class: [ClassScores; K],
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub total: u64,
}

impl ScoreReport {
    pub fn summary(&self) -> ScoreSummary {
        ScoreSummary {
            micro_f1: self.micro_f1,
            macro_f1: self.macro_f1,
            weighted_f1: self.weighted_f1,
        }
    }
}

/// The three reported aggregates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class and aggregate F1. Any 0/0 counts as 0, and classes without
/// support still enter the macro mean with F1 = 0.
pub fn f1_scores(cm: &ConfusionMatrix) -> ScoreReport {
    let c = &cm.counts;
    let total = cm.total();
    let mut per_class = [ClassScores {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        support: 0,
    }; K];
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for k in 0..K {
        let tp = c[k][k];
        let support: u64 = c[k].iter().sum();
        let predicted: u64 = (0..K).map(|g| c[g][k]).sum();
        let fp = predicted - tp;
        let fn_ = support - tp;
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        per_class[k] = ClassScores {
            precision,
            recall,
            f1: harmonic(precision, recall),
            support,
        };
    }
    let micro_p = ratio(tp_all, tp_all + fp_all);
    let micro_r = ratio(tp_all, tp_all + fn_all);
    let macro_f1 = per_class.iter().map(|s| s.f1).sum::<f64>() / K as f64;
    let weighted_f1 = if total == 0 {
        0.0
    } else {
        per_class.iter().map(|s| s.support as f64 * s.f1).sum::<f64>() / total as f64
    };
    ScoreReport {
        per_class,
        micro_f1: harmonic(micro_p, micro_r),
        macro_f1,
        weighted_f1,
        total,
    }
}

/// A row of a results table. `scores = None` marks a failed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub language: String,
    pub scores: Option<ScoreSummary>,
}

impl TableRow {
    pub fn new(name: &str, language: &str, scores: ScoreSummary) -> Self {
        TableRow {
            name: name.into(),
            language: language.into(),
            scores: Some(scores),
        }
    }

    pub fn failed(name: &str, language: &str) -> Self {
        TableRow {
            name: name.into(),
            language: language.into(),
            scores: None,
        }
    }

    fn cells(&self) -> [String; 5] {
        let fmt = |v: Option<f64>| match v {
            Some(v) => format!("{v:.4}"),
            None => String::from("FAILED"),
        };
        let s = self.scores;
        [
            self.name.clone(),
            self.language.clone(),
            fmt(s.map(|s| s.micro_f1)),
            fmt(s.map(|s| s.macro_f1)),
            fmt(s.map(|s| s.weighted_f1)),
        ]
    }
}

const HEADER: [&str; 5] = ["Combination", "Language", "Micro-F1", "Macro-F1", "Weighted-F1"];

/// Fixed-width rendering: names left-aligned, scores right-aligned, 4 decimals.
pub fn render_fixed_width(rows: &[TableRow]) -> String {
    let cells: Vec<[String; 5]> = rows.iter().map(TableRow::cells).collect();
    let mut widths = HEADER.map(|h| h.chars().count());
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: [&str; 5]| {
        let mut s = String::new();
        for (i, (c, w)) in row.iter().zip(widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - c.chars().count();
            if i < 2 {
                s.push_str(c);
                s.extend(core::iter::repeat_n(' ', pad));
            } else {
                s.extend(core::iter::repeat_n(' ', pad));
                s.push_str(c);
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut out, HEADER);
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.extend(core::iter::repeat_n('-', rule));
    out.push('\n');
    for row in &cells {
        line(&mut out, row.each_ref().map(String::as_str));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        String::from(s)
    }
}

/// CSV rendering with a header row.
pub fn render_csv(rows: &[TableRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", HEADER.join(","));
    for row in rows {
        let cells = row.cells();
        let fields: Vec<String> = cells.iter().map(|c| csv_field(c)).collect();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}
