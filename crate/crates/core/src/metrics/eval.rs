//! Precision/recall/F1 reporting with strict matching (HE, RE) and
//! assignment-based soft matching (SE).

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::assignment::optimal_assignment;
use super::gestalt::section_similarity;
use crate::doc::{AnnotationSet, Document};
use crate::tagging::Task;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Matching score `S_m`.
    pub s_m: f64,
    pub p_size: usize,
    pub g_size: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalReport {
    pub fn from_counts(s_m: f64, p_size: usize, g_size: usize) -> Self {
        let ratio = |n: usize| if n == 0 { 0.0 } else { s_m / n as f64 };
        let precision = ratio(p_size);
        let recall = ratio(g_size);
        Self {
            s_m,
            p_size,
            g_size,
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }

    /// Corpus-level report: `S_m`, `|P|` and `|G|` summed before division.
    pub fn micro(reports: &[EvalReport]) -> Self {
        let s_m = reports.iter().map(|r| r.s_m).sum();
        let p = reports.iter().map(|r| r.p_size).sum();
        let g = reports.iter().map(|r| r.g_size).sum();
        Self::from_counts(s_m, p, g)
    }

    /// Per-document precision and recall averaged; counts are still summed.
    pub fn macro_average(reports: &[EvalReport]) -> Self {
        let mut out = Self::micro(reports);
        if reports.is_empty() {
            return out;
        }
        let n = reports.len() as f64;
        out.precision = reports.iter().map(|r| r.precision).sum::<f64>() / n;
        out.recall = reports.iter().map(|r| r.recall).sum::<f64>() / n;
        out.f1 = f1(out.precision, out.recall);
        out
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Number of predictions equal to some gold item, each gold consumable once.
pub fn strict_score<T: Eq + Hash>(predictions: &[T], golds: &[T]) -> f64 {
    let mut remaining: HashMap<&T, usize> = HashMap::new();
    for g in golds {
        *remaining.entry(g).or_default() += 1;
    }
    let mut matched = 0usize;
    for p in predictions {
        if let Some(n) = remaining.get_mut(p).filter(|n| **n > 0) {
            *n -= 1;
            matched += 1;
        }
    }
    matched as f64
}

/// `S_m` for `(heading, body)` text facts: optimal one-to-one matching over
/// pairwise section similarity.
pub fn section_score(predictions: &[(String, String)], golds: &[(String, String)]) -> f64 {
    let sim: Vec<Vec<f64>> = predictions
        .iter()
        .map(|p| {
            golds
                .iter()
                .map(|g| section_similarity((&p.0, &p.1), (&g.0, &g.1)))
                .collect()
        })
        .collect();
    optimal_assignment(&sim).total
}

pub fn evaluate_strict<T: Eq + Hash>(predictions: &[T], golds: &[T]) -> EvalReport {
    EvalReport::from_counts(strict_score(predictions, golds), predictions.len(), golds.len())
}

pub fn evaluate_sections(predictions: &[(String, String)], golds: &[(String, String)]) -> EvalReport {
    EvalReport::from_counts(section_score(predictions, golds), predictions.len(), golds.len())
}

/// Section facts as surface text.
pub fn section_texts(doc: &Document, ann: &AnnotationSet) -> Vec<(String, String)> {
    ann.sections
        .iter()
        .map(|s| (doc.span_text(s.heading), doc.span_text(s.body)))
        .collect()
}

/// Score one document's predictions for `task`.
pub fn evaluate(doc: &Document, predicted: &AnnotationSet, gold: &AnnotationSet, task: Task) -> EvalReport {
    match task {
        Task::He => evaluate_strict(&predicted.headings, &gold.headings),
        Task::Re => evaluate_strict(&predicted.relations, &gold.relations),
        Task::Se => evaluate_sections(&section_texts(doc, predicted), &section_texts(doc, gold)),
    }
}
