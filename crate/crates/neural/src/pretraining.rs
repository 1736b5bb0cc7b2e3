//! Self-supervised batch construction: masked layout-language modelling and
//! potential heading selection.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use vrdie_core::{Document, GridBBox, Span, Token};

use crate::encoder::ModelInput;
use crate::error::{Error, Result};
use crate::heads::PhsTargets;
use crate::vocab::{MASK, SEP, SPECIALS};

/// A sequence with some tokens hidden. Layout, positions and segments are
/// those of the original window.
#[derive(Debug, Clone, PartialEq)]
pub struct MllmBatch {
    pub input: ModelInput,
    /// Original id at each masked position, `None` elsewhere.
    pub targets: Vec<Option<u32>>,
    pub masked: Vec<bool>,
}

/// Mask each token independently with probability `mask_rate`; a masked
/// token becomes `[MASK]` (80%), a random ordinary id (10%) or stays (10%).
/// Returns `None` for windows under two tokens or when nothing got masked.
pub fn build_mllm_batch<R: Rng + ?Sized>(
    window: &ModelInput,
    mask_rate: f64,
    vocab_size: usize,
    rng: &mut R,
) -> Result<Option<MllmBatch>> {
    if !(mask_rate > 0.0 && mask_rate < 1.0) {
        return Err(Error::Input(format!("mask rate {mask_rate} outside (0, 1)")));
    }
    if window.len() < 2 {
        return Ok(None);
    }
    let first_ordinary = SPECIALS.len() as u32;
    let mut input = window.clone();
    let mut targets = vec![None; window.len()];
    let mut masked = vec![false; window.len()];
    for i in 0..window.len() {
        if !window.mask[i] || !rng.random_bool(mask_rate) {
            continue;
        }
        masked[i] = true;
        targets[i] = Some(window.token_ids[i]);
        let r: f64 = rng.random();
        if r < 0.8 {
            input.token_ids[i] = MASK;
        } else if r < 0.9 && vocab_size as u32 > first_ordinary {
            input.token_ids[i] = rng.random_range(first_ordinary..vocab_size as u32);
        }
    }
    if !masked.iter().any(|&m| m) {
        return Ok(None);
    }
    debug_assert_eq!(input.bboxes, window.bboxes);
    Ok(Some(MllmBatch {
        input,
        targets,
        masked,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadingHeuristic {
    /// A token qualifies when its font size exceeds the page median by this
    /// factor.
    pub font_ratio: f64,
    pub max_run: usize,
}

impl Default for HeadingHeuristic {
    fn default() -> Self {
        Self {
            font_ratio: 1.15,
            max_run: 30,
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Two tokens share a line when their vertical extents overlap by at least
/// half the shorter height.
fn same_line(a: &Token, b: &Token) -> bool {
    let [_, ay0, _, ay1] = a.bbox.coords();
    let [_, by0, _, by1] = b.bbox.coords();
    let overlap = ay1.min(by1) - ay0.max(by0);
    let shorter = (ay1 - ay0).min(by1 - by0);
    overlap > 0.0 && overlap >= 0.5 * shorter
}

/// Maximal same-line runs of unusually large text, as global token spans.
pub fn select_potential_headings(doc: &Document, heuristic: &HeadingHeuristic) -> Vec<Span> {
    let mut out = Vec::new();
    for page in &doc.pages {
        let mut fonts: Vec<f64> = page.tokens.iter().filter_map(|t| t.font_size).collect();
        if fonts.is_empty() {
            continue;
        }
        let threshold = median(&mut fonts) * heuristic.font_ratio;
        let large = |t: &Token| t.font_size.is_some_and(|f| f > threshold);
        let mut run: Option<(usize, usize)> = None; // (first, last) page-local
        let mut flush = |run: &mut Option<(usize, usize)>| {
            if let Some((a, b)) = run.take() {
                if b - a < heuristic.max_run {
                    let base = page.tokens[a].global_index;
                    out.push(Span::new(base, base + (b - a)));
                }
            }
        };
        for (i, tok) in page.tokens.iter().enumerate() {
            if !large(tok) {
                flush(&mut run);
                continue;
            }
            match run {
                Some((a, b)) if b + 1 == i && same_line(&page.tokens[b], tok) => run = Some((a, i)),
                _ => {
                    flush(&mut run);
                    run = Some((i, i));
                }
            }
        }
        flush(&mut run);
    }
    out
}

/// A body with its heading runs masked, followed by `[SEP]` and the
/// original runs in scrambled order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhsBatch {
    pub input: ModelInput,
    pub targets: PhsTargets,
}

/// With probability `instance_rate`, build a heading-selection instance from
/// a window and its candidate runs (window-local spans). Candidates that do
/// not fit in `max_len` together with their appended copies are dropped from
/// the end; the body is cut after the last kept candidate if needed.
pub fn build_phs_batch<R: Rng + ?Sized>(
    window: &ModelInput,
    candidates: &[Span],
    rng: &mut R,
    instance_rate: f64,
    max_len: usize,
) -> Result<Option<PhsBatch>> {
    if let Some(c) = candidates.iter().find(|c| c.end >= window.len()) {
        return Err(Error::Input(format!("candidate {c} outside window of {}", window.len())));
    }
    if candidates.len() < 2 || !rng.random_bool(instance_rate) {
        return Ok(None);
    }
    let mut fit = None;
    for k in (2..=candidates.len()).rev() {
        let appended: usize = 1 + candidates[..k].iter().map(Span::len).sum::<usize>();
        let Some(room) = max_len.checked_sub(appended) else { continue };
        if candidates[k - 1].end < room {
            fit = Some((k, room.min(window.len())));
            break;
        }
    }
    let Some((k, body_len)) = fit else {
        return Ok(None);
    };
    let slots = candidates[..k].to_vec();
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);

    let mut input = ModelInput {
        token_ids: window.token_ids[..body_len].to_vec(),
        positions: (0..body_len as u32).collect(),
        segments: window.segments[..body_len].to_vec(),
        bboxes: window.bboxes[..body_len].to_vec(),
        mask: window.mask[..body_len].to_vec(),
    };
    for s in &slots {
        input.token_ids[s.start..=s.end].fill(MASK);
    }
    let push = |input: &mut ModelInput, id: u32| {
        input.positions.push(input.token_ids.len() as u32);
        input.token_ids.push(id);
        input.segments.push(1);
        input.bboxes.push(GridBBox::ZERO);
        input.mask.push(true);
    };
    push(&mut input, SEP);
    let mut fragments = Vec::with_capacity(k);
    for &c in &order {
        let start = input.len();
        for &id in &window.token_ids[slots[c].start..=slots[c].end] {
            push(&mut input, id);
        }
        fragments.push(Span::new(start, input.len() - 1));
    }
    let mut alignment = vec![0; k];
    for (j, &c) in order.iter().enumerate() {
        alignment[c] = j;
    }
    let targets = PhsTargets {
        slots,
        fragments,
        alignment,
    };
    debug_assert!(targets.is_bijection());
    Ok(Some(PhsBatch { input, targets }))
}
