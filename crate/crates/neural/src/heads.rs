//! Output heads and their losses: per-token labeling, masked-token
//! prediction, and heading-slot selection. Each loss returns its gradient
//! with respect to the contextual representation.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use vrdie_core::Span;

use crate::error::{Error, Result};
use crate::params::Matrix;

/// Per-token affine projection `[len x hidden] . [hidden x out] + b`.
pub fn project(hidden: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    if hidden.ncols() != w.nrows() || w.ncols() != b.ncols() {
        return Err(Error::Input(format!(
            "projection shape mismatch: {:?} . {:?} + {:?}",
            hidden.dim(),
            w.dim(),
            b.dim()
        )));
    }
    Ok(hidden.dot(w) + b)
}

fn log_softmax_row(row: ndarray::ArrayView1<f64>) -> Array1<f64> {
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.mapv(|v| v - lse)
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Result of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossStats {
    /// Mean cross-entropy over scored items.
    pub loss: f64,
    pub count: usize,
    /// Scored items whose argmax equals the target.
    pub correct: usize,
}

/// Gradients of a head loss: with respect to the contextual matrix and to
/// the head's own weights.
#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub d_hidden: Matrix,
    pub d_w: Matrix,
    pub d_b: Matrix,
}

/// Mean softmax cross-entropy of `hidden . w + b` against `targets`; `None`
/// positions are ignored.
pub fn cross_entropy_head(
    hidden: &Matrix,
    w: &Matrix,
    b: &Matrix,
    targets: &[Option<u32>],
) -> Result<(LossStats, HeadGrads)> {
    if targets.len() != hidden.nrows() {
        return Err(Error::Input(format!(
            "{} targets for {} positions",
            targets.len(),
            hidden.nrows()
        )));
    }
    let count = targets.iter().flatten().count();
    if count == 0 {
        return Err(Error::UndefinedLoss("no scored positions".into()));
    }
    let classes = w.ncols();
    if let Some(t) = targets.iter().flatten().find(|&&t| t as usize >= classes) {
        return Err(Error::Input(format!("target {t} outside {classes} classes")));
    }
    let logits = project(hidden, w, b)?;
    let mut d_logits = Array2::<f64>::zeros(logits.raw_dim());
    let mut total = 0.0;
    let mut correct = 0;
    let inv = 1.0 / count as f64;
    for (i, target) in targets.iter().enumerate() {
        let Some(t) = *target else { continue };
        let t = t as usize;
        let row = logits.row(i);
        let logp = log_softmax_row(row);
        total -= logp[t];
        if argmax(row) == t {
            correct += 1;
        }
        let mut d = d_logits.row_mut(i);
        d.assign(&logp.mapv(|v| v.exp() * inv));
        d[t] -= inv;
    }
    let grads = HeadGrads {
        d_hidden: d_logits.dot(&w.t()),
        d_w: hidden.t().dot(&d_logits),
        d_b: d_logits.sum_axis(Axis(0)).insert_axis(Axis(0)),
    };
    Ok((
        LossStats {
            loss: total * inv,
            count,
            correct,
        },
        grads,
    ))
}

/// Heading-slot selection targets over a concatenated sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhsTargets {
    /// Masked heading runs inside the body, in order.
    pub slots: Vec<Span>,
    /// Appended candidate fragments, in their scrambled order.
    pub fragments: Vec<Span>,
    /// `alignment[i]` is the fragment holding slot `i`'s original tokens.
    pub alignment: Vec<usize>,
}

impl PhsTargets {
    /// Alignment is a bijection between slots and fragments.
    pub fn is_bijection(&self) -> bool {
        self.slots.len() == self.fragments.len() && self.is_injective()
    }

    /// Every slot names a distinct, existing fragment.
    pub fn is_injective(&self) -> bool {
        if self.alignment.len() != self.slots.len() {
            return false;
        }
        let mut seen = vec![false; self.fragments.len()];
        for &j in &self.alignment {
            if j >= seen.len() || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        true
    }
}

fn mean_rows(hidden: &Matrix, span: Span) -> Array1<f64> {
    hidden
        .slice(ndarray::s![span.start..=span.end, ..])
        .mean_axis(Axis(0))
        .expect("non-empty span")
}

/// Slot-by-fragment score matrix: `dot(mean(slot rows), mean(fragment rows))`.
pub fn phs_scores(hidden: &Matrix, targets: &PhsTargets) -> Matrix {
    let slots: Vec<Array1<f64>> = targets.slots.iter().map(|&s| mean_rows(hidden, s)).collect();
    let frags: Vec<Array1<f64>> = targets.fragments.iter().map(|&s| mean_rows(hidden, s)).collect();
    Array2::from_shape_fn((slots.len(), frags.len()), |(i, j)| slots[i].dot(&frags[j]))
}

/// Per-slot softmax cross-entropy over fragments, averaged over slots.
pub fn phs_loss(hidden: &Matrix, targets: &PhsTargets) -> Result<(LossStats, Matrix)> {
    if targets.slots.is_empty() {
        return Err(Error::UndefinedLoss("no heading slots".into()));
    }
    if !targets.is_injective() {
        return Err(Error::Input("slot alignment must name distinct fragments".into()));
    }
    let n = hidden.nrows();
    if let Some(s) = targets.slots.iter().chain(&targets.fragments).find(|s| s.end >= n) {
        return Err(Error::Input(format!("span {s} outside sequence of {n}")));
    }
    let scores = phs_scores(hidden, targets);
    let k = targets.slots.len();
    let inv = 1.0 / k as f64;
    let mut d_scores = Array2::<f64>::zeros(scores.raw_dim());
    let mut total = 0.0;
    let mut correct = 0;
    for (i, &gold) in targets.alignment.iter().enumerate() {
        let logp = log_softmax_row(scores.row(i));
        total -= logp[gold];
        if argmax(scores.row(i)) == gold {
            correct += 1;
        }
        let mut d = d_scores.row_mut(i);
        d.assign(&logp.mapv(|v| v.exp() * inv));
        d[gold] -= inv;
    }

    let slot_means: Vec<Array1<f64>> = targets.slots.iter().map(|&s| mean_rows(hidden, s)).collect();
    let frag_means: Vec<Array1<f64>> = targets.fragments.iter().map(|&s| mean_rows(hidden, s)).collect();
    let mut d_hidden = Array2::<f64>::zeros(hidden.raw_dim());
    let spread = |d_hidden: &mut Matrix, span: Span, g: &Array1<f64>| {
        let share = g / span.len() as f64;
        for mut row in d_hidden.slice_mut(ndarray::s![span.start..=span.end, ..]).rows_mut() {
            row += &share;
        }
    };
    for (i, &slot) in targets.slots.iter().enumerate() {
        let mut g = Array1::<f64>::zeros(hidden.ncols());
        for (j, f) in frag_means.iter().enumerate() {
            g.scaled_add(d_scores[[i, j]], f);
        }
        spread(&mut d_hidden, slot, &g);
    }
    for (j, &frag) in targets.fragments.iter().enumerate() {
        let mut g = Array1::<f64>::zeros(hidden.ncols());
        for (i, s) in slot_means.iter().enumerate() {
            g.scaled_add(d_scores[[i, j]], s);
        }
        spread(&mut d_hidden, frag, &g);
    }
    Ok((
        LossStats {
            loss: total * inv,
            count: k,
            correct,
        },
        d_hidden,
    ))
}
